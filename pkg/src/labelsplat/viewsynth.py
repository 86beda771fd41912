"""Camera-path densification for video object tracking.

Trackers lose objects between sparsely captured views; inserting rendered
frames along interpolated poses densifies the camera path so tracking stays
locked, after which the inserted frames' masks are discarded and only the
original views keep their tracked label maps.

Rotations travel the shortest great-circle arc (quaternion slerp) and the
world-to-camera translation vector is interpolated linearly; intrinsics and
image size pass through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .scene import Camera, GaussianScene
from .rasterize import render


def interpolate_pair(cam_a: Camera, cam_b: Camera, inserts: int) -> List[Camera]:
    """inserts cameras strictly between cam_a and cam_b at the fractions
    m / (inserts + 1), m = 1..inserts. Both cameras must share intrinsics
    and image size."""
    if inserts < 0:
        raise ValueError("inserts must be nonnegative")
    for attr in ("width", "height", "fx", "fy", "cx", "cy"):
        if getattr(cam_a, attr) != getattr(cam_b, attr):
            raise ValueError(f"cameras disagree on {attr}")
    if inserts == 0:
        return []
    rots = Rotation.from_matrix(np.stack([cam_a.rotation, cam_b.rotation]))
    slerp = Slerp([0.0, 1.0], rots)
    ts = np.arange(1, inserts + 1) / (inserts + 1)
    Rs = slerp(ts).as_matrix()
    out = []
    for m, (t, R) in enumerate(zip(ts, Rs), start=1):
        trans = (1.0 - t) * cam_a.translation + t * cam_b.translation
        out.append(cam_a.with_pose(R, trans, id=f"{cam_a.id}~{cam_b.id}~{m}"))
    return out


@dataclass(frozen=True)
class PathCamera:
    """One camera along a densified path; is_original marks input views."""

    camera: Camera
    is_original: bool


@dataclass(frozen=True)
class PathFrame:
    """One rendered frame along a densified path."""

    camera: Camera
    image: np.ndarray
    is_original: bool


def interpolate_cameras(cameras: Sequence[Camera],
                        inserts_per_gap: int) -> List[PathCamera]:
    """Original cameras in their given order with inserts_per_gap
    interpolated cameras between each consecutive pair, all flagged."""
    cams = list(cameras)
    if not cams:
        return []
    out = [PathCamera(cams[0], True)]
    for a, b in zip(cams[:-1], cams[1:]):
        out.extend(PathCamera(c, False)
                   for c in interpolate_pair(a, b, inserts_per_gap))
        out.append(PathCamera(b, True))
    return out


def densify_views(scene: GaussianScene, cameras: Sequence[Camera],
                  inserts_per_gap: int) -> List[PathFrame]:
    """Render the densified camera path of a pre-trained scene: the dense
    frame sequence handed to an external tracker. Each frame is the plain
    render of its (original or inserted) camera."""
    path = interpolate_cameras(cameras, inserts_per_gap)
    return [PathFrame(p.camera, render(scene, p.camera).color, p.is_original)
            for p in path]


def retain_training_masks(tracked: Sequence, original_flags: Sequence[bool]) -> List:
    """Keep the tracker outputs of original views only.

    tracked is one tracker output per densified frame (same order and
    length as original_flags). Length mismatch is an error, not a
    truncation."""
    if len(tracked) != len(original_flags):
        raise ValueError(
            f"{len(tracked)} tracker outputs for {len(original_flags)} frames")
    return [t for t, keep in zip(tracked, original_flags) if keep]
