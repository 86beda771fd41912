"""Synthetic labeled scenes with exact ground truth.

Objects are Gaussian blob clusters at distinct depths, arranged so at least
one pair overlaps on screen from the training arc (a genuine occlusion for
the masking path to find). Views carry the rendered photo, a label map from
the ground-truth best contributor (standing in for a video tracker), and the
rendered depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .rasterize import render, render_depth
from .scene import Camera, DepthMap, GaussianScene, LabelMap, ViewRecord

FAR_SENTINEL = 1e6


def look_at_camera(cam_id: str, position, target, width: int = 128,
                   height: int = 128, fx: float = 140.0,
                   fy: Optional[float] = None, up=(0.0, 1.0, 0.0)) -> Camera:
    """Camera at `position` with its optical axis through `target`.

    Image x follows world `up` x forward; degenerate up (parallel to the view
    direction) falls back to the world x axis.
    """
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    forward = target - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("camera position and target coincide")
    z = forward / norm
    up = np.asarray(up, dtype=np.float64)
    x = np.cross(up, z)
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(np.array([1.0, 0.0, 0.0]), z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return Camera(
        id=cam_id, width=width, height=height,
        fx=fx, fy=fx if fy is None else fy,
        cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        rotation=R, translation=-R @ position,
    )


def _quat_from_matrix(R: np.ndarray) -> np.ndarray:
    from scipy.spatial.transform import Rotation
    x, y, z, w = Rotation.from_matrix(R).as_quat()
    return np.array([w, x, y, z])


def _face(center, u, v, normal, half_u, half_v, grid: int, box_R: np.ndarray):
    """Coplanar pancake Gaussians tiling one rectangular face.

    Flat facets matter: on a curved shell the neighbors' tangent planes bulge
    in front of every local patch (convexity), so no Gaussian ever dominates a
    pixel's blend and contribution-based lifting starves. Coplanar tiles keep
    the nearest Gaussian dominant, like a real flat textured surface.
    """
    su = 2.0 * half_u / grid
    sv = 2.0 * half_v / grid
    ticks = lambda h, s: -h + s * (np.arange(grid) + 0.5)
    uu, vv = np.meshgrid(ticks(half_u, su), ticks(half_v, sv), indexing="ij")
    rel = uu.ravel()[:, None] * u + vv.ravel()[:, None] * v
    means = center + rel @ box_R.T
    axes = np.stack([u, v, normal], axis=1)
    if np.linalg.det(axes) < 0:
        axes = np.stack([u, -v, normal], axis=1)
    quat = _quat_from_matrix(box_R @ axes)
    sigma = 0.85 * max(su, sv)
    n = grid * grid
    return (means, np.tile(quat, (n, 1)),
            np.log(np.tile([sigma, sigma, sigma / 8.0], (n, 1))))


_AXES = np.eye(3)


def _box_object(rng: np.random.Generator, center, half, grid: int,
                base_color, label: int, box_R: np.ndarray) -> GaussianScene:
    """Textured near-opaque box: six flat faces of tiled pancakes."""
    center = np.asarray(center, dtype=np.float64)
    half = np.asarray(half, dtype=np.float64)
    parts = []
    for axis in range(3):
        u, v, n = _AXES[(axis + 1) % 3], _AXES[(axis + 2) % 3], _AXES[axis]
        for sign in (1.0, -1.0):
            face_center = center + (sign * half[axis] * n) @ box_R.T
            parts.append(_face(face_center, u, v, sign * n,
                               half[(axis + 1) % 3], half[(axis + 2) % 3],
                               grid, box_R))
    means = np.concatenate([p[0] for p in parts])
    quats = np.concatenate([p[1] for p in parts])
    log_s = np.concatenate([p[2] for p in parts])
    n_total = len(means)
    colors = np.clip(base_color + rng.normal(scale=0.20, size=(n_total, 3)),
                     0.05, 0.95)
    return GaussianScene(
        means=means, log_scales=log_s, rotations=quats,
        opacity_logits=rng.uniform(4.5, 5.5, size=n_total),
        colors=colors, labels=np.full(n_total, label, dtype=np.int32),
    )


def _card_object(rng: np.random.Generator, center, half_u, half_v, grid: int,
                 base_color, label: int, card_R: np.ndarray) -> GaussianScene:
    """Textured flat card: a single tiled face (normal on the card's -z)."""
    means, quats, log_s = _face(np.asarray(center, dtype=np.float64),
                                _AXES[0], _AXES[1], -_AXES[2],
                                half_u, half_v, grid, card_R)
    n = len(means)
    colors = np.clip(base_color + rng.normal(scale=0.20, size=(n, 3)),
                     0.05, 0.95)
    return GaussianScene(
        means=means, log_scales=log_s, rotations=quats,
        opacity_logits=rng.uniform(4.5, 5.5, size=n),
        colors=colors, labels=np.full(n, label, dtype=np.int32),
    )


_OBJECT_COLORS = np.array([
    [0.85, 0.25, 0.20],
    [0.20, 0.45, 0.85],
    [0.25, 0.75, 0.30],
    [0.85, 0.70, 0.20],
    [0.60, 0.30, 0.75],
])

# Object centers: label 1 (near box) slides across label 2 (far card) as the
# camera swings, overlapping for arc angles left of roughly +0.16 rad and
# separating to the right; test views sample the clean sector. Label 3 shares
# the card's depth so their screen gap is parallax-free (constant in all
# views).
_OBJECT_CENTERS = np.array([
    [-0.40, 0.05, 3.30],
    [0.45, 0.00, 5.00],
    [1.10, -1.00, 5.00],
    [0.80, 0.95, 4.60],
    [-1.05, 0.95, 3.90],
])


def make_synthetic_scene(seed: int = 0, n_objects: int = 3,
                         gaussians_per_object: int = 40,
                         radius: float = 0.45,
                         background=(0.12, 0.12, 0.14)) -> GaussianScene:
    """Ground-truth scene of labeled flat-faceted objects (labels 1..n_objects).

    Object 1 is a box in front of object 2, a larger card; from the left
    sector of the camera arc 1 partially occludes 2, and the pair separates
    toward the right. The rest stand apart. Faces carry a
    per-Gaussian color texture. gaussians_per_object sets the face tiling
    density (grid ~ sqrt of it), radius the overall object size.
    """
    from scipy.spatial.transform import Rotation

    if not (1 <= n_objects <= len(_OBJECT_CENTERS)):
        raise ValueError(f"n_objects must lie in [1, {len(_OBJECT_CENTERS)}]")
    rng = np.random.default_rng(seed)
    grid = max(3, round(math.sqrt(gaussians_per_object)))
    euler = Rotation.from_euler

    def box(k, half_ratios, angles, g=grid):
        return _box_object(rng, _OBJECT_CENTERS[k],
                           radius * np.asarray(half_ratios), g,
                           _OBJECT_COLORS[k], k + 1,
                           euler("yx", angles).as_matrix())

    builders = [
        lambda: box(0, (0.64, 0.84, 0.62), [0.35, 0.15]),
        lambda: _card_object(rng, _OBJECT_CENTERS[1], radius * 1.05,
                             radius * 1.07, max(4, round(grid * 1.3)),
                             _OBJECT_COLORS[1], 2,
                             euler("yx", [0.12, -0.08]).as_matrix()),
        lambda: box(2, (0.55, 0.55, 0.55), [-0.4, 0.1]),
        lambda: box(3, (0.6, 0.6, 0.6), [0.5, -0.2]),
        lambda: box(4, (0.55, 0.7, 0.55), [-0.2, 0.3]),
    ]
    objects = [builders[k]() for k in range(n_objects)]
    return GaussianScene(
        means=np.concatenate([b.means for b in objects]),
        log_scales=np.concatenate([b.log_scales for b in objects]),
        rotations=np.concatenate([b.rotations for b in objects]),
        opacity_logits=np.concatenate([b.opacity_logits for b in objects]),
        colors=np.concatenate([b.colors for b in objects]),
        labels=np.concatenate([b.labels for b in objects]),
        background_color=np.asarray(background, dtype=np.float64),
    )


def ring_cameras(n: int, center=(0.0, 0.0, 4.0), rig_radius: float = 4.0,
                 width: int = 128, height: int = 128, fx: float = 140.0,
                 arc: float = 1.0, elevation: float = 0.25,
                 arc_offset: float = 0.0, prefix: str = "view") -> List[Camera]:
    """n cameras on an arc in front of the scene, alternating between two
    elevations, all aimed at `center`. arc_offset recenters the swept sector
    (asymmetric arcs pick out sub-ranges of the rig)."""
    center = np.asarray(center, dtype=np.float64)
    cams = []
    angles = np.linspace(-arc / 2.0, arc / 2.0, n) if n > 1 else np.array([0.0])
    angles = angles + arc_offset
    for i, a in enumerate(angles):
        h = elevation if i % 2 == 0 else -elevation
        pos = center + rig_radius * np.array([math.sin(a), h, -math.cos(a)])
        cams.append(look_at_camera(f"{prefix}{i:02d}", pos, center,
                                   width=width, height=height, fx=fx))
    return cams


def observe(scene: GaussianScene, camera: Camera,
            with_depth: bool = True) -> ViewRecord:
    """Render one ground-truth observation: photo, best-contributor label map
    (the synthetic stand-in for a tracker), and depth."""
    out = render(scene, camera)
    depth = None
    if with_depth:
        depth = DepthMap(render_depth(scene, camera, far=FAR_SENTINEL))
    # Labels only where the render is substantially opaque: the faint
    # silhouette skirt belongs to no object, matching how coverage masks are
    # thresholded at evaluation time.
    ids = np.where(out.alpha > 0.5, out.label, 0)
    return ViewRecord(
        camera=camera,
        image=out.color,
        label_map=LabelMap(ids),
        depth_map=depth,
    )


def make_synthetic_views(scene: GaussianScene, n_train: int = 12,
                         n_test: int = 4, width: int = 128, height: int = 128,
                         fx: float = 140.0,
                         with_depth: bool = True) -> Tuple[List[ViewRecord], List[ViewRecord]]:
    """Train views sweep the full arc, including the sector where object 1
    occludes object 2; test views sit in the clean right sector (novel poses,
    same rig) where every object is fully visible."""
    train_cams = ring_cameras(n_train, width=width, height=height, fx=fx,
                              arc=1.0, prefix="train")
    test_cams = ring_cameras(n_test, width=width, height=height, fx=fx,
                             arc=0.28, arc_offset=0.34, elevation=0.12,
                             prefix="test")
    train = [observe(scene, c, with_depth) for c in train_cams]
    test = [observe(scene, c, with_depth) for c in test_cams]
    return train, test
