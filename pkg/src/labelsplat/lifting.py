"""Lifting tracked 2D labels onto 3D Gaussians, and object extraction.

Each pixel whose label is set and whose strongest render contributor carried
enough blend weight proposes that contributor take the pixel's label. The
Gaussian projection filter drops proposals whose Gaussian center projects to
a differently-labeled pixel (or out of frame): an elongated Gaussian can
dominate a pixel far from its center, and without the filter it would import
labels across object boundaries.

Votes persist per Gaussian as (weight, label): a commit overwrites only with
a strictly heavier vote (ties to the lower label id), so for fixed geometry
the final labeling is independent of view visiting order, and committing the
same votes twice is a no-op.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .rasterize import RenderOutput, render
from .scene import Camera, GaussianScene, LabelMap, UNLABELED


@dataclass(frozen=True)
class LabelVote:
    """One pixel's proposal: Gaussian gaussian_index takes proposed_label,
    weighted by the pixel's best blend weight alpha * T."""

    gaussian_index: int
    proposed_label: int
    weight: float
    pixel: Tuple[int, int]  # (row, col) that voted
    view_id: str = ""


def lift_view(scene: GaussianScene, camera: Camera, label_map: LabelMap,
              threshold: float = 0.6, gpf_enabled: bool = True,
              render_output: Optional[RenderOutput] = None) -> List[LabelVote]:
    """Collect label votes from one view.

    A pixel votes when its label is nonzero and its best contributor's blend
    weight strictly exceeds threshold. With gpf_enabled, the vote also
    requires the label map at the pixel nearest the Gaussian's projected
    center to equal the pixel's label; centers projecting outside the image
    reject the vote. Votes are returned in row-major pixel order.
    """
    if label_map.shape != (camera.height, camera.width):
        raise ValueError("label map dimensions must match the camera")
    if not (0.0 <= threshold < 1.0):
        raise ValueError("threshold must lie in [0, 1)")
    # callers that already rendered this scene/camera pair can pass the
    # output through; it must be a full render (no label subset)
    out = render(scene, camera) if render_output is None else render_output
    L = label_map.ids
    cand = (L != UNLABELED) & (out.contrib.best_index >= 0) & (out.contrib.best_weight > threshold)
    if gpf_enabled:
        cand &= out.contrib.center_ok
        rows = out.contrib.best_center[..., 0]
        cols = out.contrib.best_center[..., 1]
        safe_r = np.clip(rows, 0, L.shape[0] - 1)
        safe_c = np.clip(cols, 0, L.shape[1] - 1)
        cand &= L[safe_r, safe_c] == L

    ys, xs = np.nonzero(cand)
    return [
        LabelVote(gaussian_index=int(out.contrib.best_index[y, x]),
                  proposed_label=int(L[y, x]),
                  weight=float(out.contrib.best_weight[y, x]),
                  pixel=(int(y), int(x)), view_id=camera.id)
        for y, x in zip(ys, xs)
    ]


def commit_votes(scene: GaussianScene, votes: Sequence[LabelVote]) -> int:
    """Apply votes to the scene; returns how many Gaussians changed label.

    Per Gaussian the maximum-weight vote wins (ties broken by lower label
    id), and it only displaces the stored label when strictly better under
    the same (weight, lower-id) order. Labels are never set to 0 and never
    cleared; Gaussians without votes are untouched. Scenes built or loaded
    with preassigned labels carry stored weight 0, so any vote displaces
    those labels.
    """
    if not votes:
        return 0
    gidx = np.array([v.gaussian_index for v in votes], dtype=np.int64)
    labs = np.array([v.proposed_label for v in votes], dtype=np.int64)
    ws = np.array([v.weight for v in votes], dtype=np.float64)
    if labs.min() <= 0:
        raise ValueError("votes must propose nonzero labels")
    if gidx.min() < 0 or gidx.max() >= len(scene):
        raise ValueError("vote gaussian_index out of range")

    # Winner per Gaussian: sort by (gaussian, weight desc, label asc), keep first.
    order = np.lexsort((labs, -ws, gidx))
    first = np.ones(order.size, dtype=bool)
    first[1:] = gidx[order][1:] != gidx[order][:-1]
    win = order[first]
    g, lab, w = gidx[win], labs[win], ws[win]

    stored_w = scene.label_weights[g]
    stored_lab = scene.labels[g]
    better = (w > stored_w) | ((w == stored_w) & (lab < stored_lab))
    changed = int(np.count_nonzero(better & (lab != stored_lab)))
    scene.labels[g[better]] = lab[better].astype(np.int32)
    scene.label_weights[g[better]] = w[better]
    return changed


def extract(scene: GaussianScene, labels: Iterable[int]) -> GaussianScene:
    """New scene holding only Gaussians whose label is in labels, in their
    original order; the source scene is untouched. Rendering the result is
    bit-identical to rendering the source restricted to the same labels."""
    wanted = {int(v) for v in labels}
    idx = np.flatnonzero(np.isin(scene.labels, sorted(wanted)))
    return scene.subset(idx)


def pick_labels(label_map: LabelMap, mask: Optional[np.ndarray] = None,
                pixels: Optional[Sequence[Tuple[int, int]]] = None) -> Dict[int, int]:
    """Nonzero labels inside a region with their pixel counts.

    The region is a boolean mask and/or explicit (row, col) pixels;
    out-of-range pixels are ignored."""
    if mask is None and pixels is None:
        raise ValueError("provide a mask or pixels")
    H, W = label_map.shape
    region = np.zeros((H, W), dtype=bool)
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if m.shape != (H, W):
            raise ValueError("mask dimensions must match the label map")
        region |= m
    if pixels is not None:
        for r, c in pixels:
            if 0 <= r < H and 0 <= c < W:
                region[r, c] = True
    vals = label_map.ids[region]
    vals = vals[vals != UNLABELED]
    uniq, counts = np.unique(vals, return_counts=True)
    return {int(u): int(c) for u, c in zip(uniq, counts)}


def replay_violations(scene: GaussianScene, camera: Camera, label_map: LabelMap,
                      votes: Sequence[LabelVote]) -> List[LabelVote]:
    """Votes whose Gaussian center projects onto a pixel labeled differently
    from the vote (or off-frame): the set the projection filter must empty."""
    from .rasterize import project

    sp = project(scene, camera)
    center_of = {int(s): sp.center[i] for i, s in enumerate(sp.source_index)}
    bad = []
    H, W = label_map.shape
    for v in votes:
        c = center_of.get(v.gaussian_index)
        if c is None:
            bad.append(v)
            continue
        col, row = int(np.rint(c[0])), int(np.rint(c[1]))
        if not (0 <= row < H and 0 <= col < W):
            bad.append(v)
        elif int(label_map.ids[row, col]) != v.proposed_label:
            bad.append(v)
    return bad
