"""Occlusion analysis over one view's label map and depth map.

Where two labeled regions touch (4-adjacent pixels with different nonzero
labels), the side with smaller mean frontier depth occludes the other. Each
label's unoccluded-region mask blanks out every pixel claimed by one of its
occluders; the object-level training loss ignores those pixels, so a mask
that ends where the occluder begins stops pulling the object's Gaussians
toward the occluder's silhouette.

Relations come only from direct frontier evidence: no transitive closure, and
pairs with fewer adjacency edges than min_boundary are ignored as tracker
noise. Label 0 (unlabeled) never participates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .scene import DepthMap, LabelMap


@dataclass
class OcclusionResult:
    """labels: sorted nonzero labels present in the map. occluders[k] lists
    labels that occlude k (sorted). unocclusion[k] is the boolean (H, W) mask
    that is False exactly on pixels labeled with one of k's occluders.
    boundary_edges counts 4-adjacency edges per unordered label pair,
    including pairs that fell below min_boundary."""

    labels: List[int]
    occluders: Dict[int, List[int]] = field(default_factory=dict)
    unocclusion: Dict[int, np.ndarray] = field(default_factory=dict)
    boundary_edges: Dict[Tuple[int, int], int] = field(default_factory=dict)


def analyze_occlusion(label_map: LabelMap, depth_map: DepthMap,
                      min_boundary: int = 8, depth_tol: float = 0.0) -> OcclusionResult:
    """Compute per-label occluder lists and unoccluded-region masks.

    A pair is evaluated once it shares at least min_boundary adjacency edges.
    Frontier pixels of each side are deduplicated before the depth average
    (one pixel can meet the other region along several edges). b occludes a
    when mean_depth(b) < mean_depth(a) * (1 - depth_tol); with the default
    tol of 0 the comparison is strict, so equal-depth neighbors never occlude
    each other.
    """
    ids = label_map.ids
    if depth_map.shape != label_map.shape:
        raise ValueError("label map and depth map dimensions differ")
    if min_boundary < 1:
        raise ValueError("min_boundary must be at least 1")
    if not (0.0 <= depth_tol < 1.0):
        raise ValueError("depth_tol must lie in [0, 1)")
    H, W = ids.shape
    depth = depth_map.values.astype(np.float64).ravel()
    flat = np.arange(H * W).reshape(H, W)

    # All 4-adjacency edges between different nonzero labels.
    ea, eb, pa, pb = [], [], [], []
    for sl_a, sl_b in ((np.s_[:, :-1], np.s_[:, 1:]), (np.s_[:-1, :], np.s_[1:, :])):
        la, lb = ids[sl_a].ravel(), ids[sl_b].ravel()
        keep = (la != lb) & (la != 0) & (lb != 0)
        ea.append(la[keep])
        eb.append(lb[keep])
        pa.append(flat[sl_a].ravel()[keep])
        pb.append(flat[sl_b].ravel()[keep])
    ea, eb = np.concatenate(ea), np.concatenate(eb)
    pa, pb = np.concatenate(pa), np.concatenate(pb)

    present = sorted(int(v) for v in np.unique(ids) if v != 0)
    result = OcclusionResult(labels=present)
    occluders: Dict[int, List[int]] = {k: [] for k in present}

    lo = np.minimum(ea, eb)
    hi = np.maximum(ea, eb)
    if ea.size:
        pair_keys = lo.astype(np.int64) * (int(ids.max()) + 1) + hi
        uniq, counts = np.unique(pair_keys, return_counts=True)
        for key, count in zip(uniq, counts):
            a = int(key // (int(ids.max()) + 1))
            b = int(key % (int(ids.max()) + 1))
            result.boundary_edges[(a, b)] = int(count)
            if count < min_boundary:
                continue
            sel = (lo == a) & (hi == b)
            a_pix = np.unique(np.where(ea[sel] == a, pa[sel], pb[sel]))
            b_pix = np.unique(np.where(ea[sel] == b, pa[sel], pb[sel]))
            d_a = depth[a_pix].mean()
            d_b = depth[b_pix].mean()
            if d_b < d_a * (1.0 - depth_tol):
                occluders[a].append(b)
            if d_a < d_b * (1.0 - depth_tol):
                occluders[b].append(a)

    for k in present:
        occluders[k].sort()
        mask = np.ones((H, W), dtype=bool)
        for b in occluders[k]:
            mask &= ids != b
        result.occluders[k] = occluders[k]
        result.unocclusion[k] = mask
    return result
