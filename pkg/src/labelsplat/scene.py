"""Core scene types: labeled 3D Gaussians, cameras, label and depth grids.

A scene is a struct-of-arrays over N Gaussians. Every Gaussian carries an
integer object label; label 0 means "unlabeled / background" everywhere in
this package and is never a real object id.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

UNLABELED = 0


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) (w, x, y, z) -> rotation matrix/matrices.

    Accepts (4,) or (N, 4); normalizes defensively. Returns (3, 3) or (N, 3, 3).
    """
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    n = np.linalg.norm(q, axis=1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("zero-norm quaternion")
    w, x, y, z = (q / n).T
    R = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R[0] if single else R


@dataclass(frozen=True)
class Gaussian3D:
    """One labeled anisotropic Gaussian.

    mean: (3,) world position.
    log_scale: (3,) log of per-axis standard deviations.
    rotation: (4,) unit quaternion (w, x, y, z), |q| = 1 within 1e-6.
    opacity_logit: scalar; opacity = sigmoid(opacity_logit).
    color: (3,) RGB in [0, 1].
    label: nonnegative int, 0 = unlabeled.
    """

    mean: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    opacity_logit: float
    color: np.ndarray
    label: int = UNLABELED

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "log_scale", np.asarray(self.log_scale, dtype=np.float64))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64))
        if self.mean.shape != (3,) or self.log_scale.shape != (3,) or self.color.shape != (3,):
            raise ValueError("mean, log_scale and color must be 3-vectors")
        if self.rotation.shape != (4,):
            raise ValueError("rotation must be a 4-vector quaternion")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.log_scale))
                and np.all(np.isfinite(self.rotation)) and np.isfinite(self.opacity_logit)):
            raise ValueError("non-finite Gaussian parameters")
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-6:
            raise ValueError("rotation quaternion must have unit norm (within 1e-6)")
        if np.any(self.color < 0) or np.any(self.color > 1):
            raise ValueError("color components must lie in [0, 1]")
        if self.label < 0:
            raise ValueError("label must be nonnegative")


def covariance_of(g: Gaussian3D) -> np.ndarray:
    """3x3 world-space covariance R diag(exp(2 s)) R^T. Symmetric PSD by construction."""
    R = quat_to_rotmat(g.rotation)
    return (R * np.exp(2.0 * g.log_scale)) @ R.T


@dataclass
class GaussianScene:
    """Struct-of-arrays Gaussian collection plus scene-level settings.

    means (N,3), log_scales (N,3), rotations (N,4) unit quaternions (w,x,y,z),
    opacity_logits (N,), colors (N,3) in [0,1], labels (N,) nonnegative int32.
    label_weights (N,) records the blend weight of the vote that set each
    Gaussian's current label (0 where never voted); in-memory bookkeeping for
    order-insensitive lifting, not serialized in checkpoints.
    """

    means: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    colors: np.ndarray
    labels: np.ndarray
    background_color: np.ndarray = field(default_factory=lambda: np.zeros(3))
    label_weights: np.ndarray = None

    def __post_init__(self):
        self.means = np.ascontiguousarray(self.means, dtype=np.float64)
        self.log_scales = np.ascontiguousarray(self.log_scales, dtype=np.float64)
        self.rotations = np.ascontiguousarray(self.rotations, dtype=np.float64)
        self.opacity_logits = np.ascontiguousarray(self.opacity_logits, dtype=np.float64)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        self.background_color = np.asarray(self.background_color, dtype=np.float64)
        if self.label_weights is None:
            self.label_weights = np.zeros(len(self), dtype=np.float64)
        else:
            self.label_weights = np.ascontiguousarray(self.label_weights, dtype=np.float64)
        self.validate()

    def __len__(self) -> int:
        return self.means.shape[0]

    def validate(self):
        n = len(self)
        shapes = {
            "means": (n, 3), "log_scales": (n, 3), "rotations": (n, 4),
            "opacity_logits": (n,), "colors": (n, 3), "labels": (n,),
            "label_weights": (n,),
        }
        for name, want in shapes.items():
            got = getattr(self, name).shape
            if got != want:
                raise ValueError(f"{name} has shape {got}, expected {want}")
        if self.background_color.shape != (3,):
            raise ValueError("background_color must be a 3-vector")
        for name in ("means", "log_scales", "rotations", "opacity_logits", "colors"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in {name}")
        if n:
            norms = np.linalg.norm(self.rotations, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise ValueError("rotation quaternions must have unit norm (within 1e-6)")
            if self.colors.min() < 0 or self.colors.max() > 1:
                raise ValueError("colors must lie in [0, 1]")
            if self.labels.min() < 0:
                raise ValueError("labels must be nonnegative")

    @classmethod
    def from_gaussians(cls, gaussians: Iterable[Gaussian3D],
                       background_color=(0.0, 0.0, 0.0)) -> "GaussianScene":
        gs = list(gaussians)
        if not gs:
            return cls.empty(background_color)
        return cls(
            means=np.stack([g.mean for g in gs]),
            log_scales=np.stack([g.log_scale for g in gs]),
            rotations=np.stack([g.rotation for g in gs]),
            opacity_logits=np.array([g.opacity_logit for g in gs]),
            colors=np.stack([g.color for g in gs]),
            labels=np.array([g.label for g in gs], dtype=np.int32),
            background_color=np.asarray(background_color, dtype=np.float64),
        )

    @classmethod
    def empty(cls, background_color=(0.0, 0.0, 0.0)) -> "GaussianScene":
        return cls(
            means=np.zeros((0, 3)), log_scales=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)), opacity_logits=np.zeros(0),
            colors=np.zeros((0, 3)), labels=np.zeros(0, dtype=np.int32),
            background_color=np.asarray(background_color, dtype=np.float64),
        )

    def gaussian(self, i: int) -> Gaussian3D:
        return Gaussian3D(
            mean=self.means[i].copy(), log_scale=self.log_scales[i].copy(),
            rotation=self.rotations[i].copy(), opacity_logit=float(self.opacity_logits[i]),
            color=self.colors[i].copy(), label=int(self.labels[i]),
        )

    def copy(self) -> "GaussianScene":
        return GaussianScene(
            means=self.means.copy(), log_scales=self.log_scales.copy(),
            rotations=self.rotations.copy(), opacity_logits=self.opacity_logits.copy(),
            colors=self.colors.copy(), labels=self.labels.copy(),
            background_color=self.background_color.copy(),
            label_weights=self.label_weights.copy(),
        )

    def subset(self, indices: np.ndarray) -> "GaussianScene":
        """New scene holding the selected Gaussians in the given index order."""
        idx = np.asarray(indices)
        return GaussianScene(
            means=self.means[idx], log_scales=self.log_scales[idx],
            rotations=self.rotations[idx], opacity_logits=self.opacity_logits[idx],
            colors=self.colors[idx], labels=self.labels[idx],
            background_color=self.background_color.copy(),
            label_weights=self.label_weights[idx],
        )

    @property
    def label_count(self) -> int:
        """Number of distinct nonzero labels present."""
        return int(np.unique(self.labels[self.labels != UNLABELED]).size)

    def present_labels(self) -> np.ndarray:
        """Sorted distinct nonzero labels."""
        return np.unique(self.labels[self.labels != UNLABELED]).astype(np.int64)

    def opacities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.opacity_logits))

    def covariances(self) -> np.ndarray:
        """(N, 3, 3) world covariances R diag(exp(2 s)) R^T for all Gaussians."""
        R = quat_to_rotmat(self.rotations) if len(self) else np.zeros((0, 3, 3))
        S2 = np.exp(2.0 * self.log_scales)
        return np.einsum("nij,nj,nkj->nik", R, S2, R)


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with world-to-camera pose.

    rotation: (3,3) orthonormal world-to-camera matrix, det +1 within 1e-6.
    translation: (3,) world-to-camera offset; camera-space point = R p + t.
    Pixel (row r, col c) has continuous image coordinates (x=c, y=r) at its
    center; projection is x = fx X/Z + cx, y = fy Y/Z + cy.
    """

    id: str
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        RtR = self.rotation.T @ self.rotation
        if not np.allclose(RtR, np.eye(3), atol=1e-6):
            raise ValueError("rotation is not orthonormal (within 1e-6)")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-6:
            raise ValueError("rotation must have determinant +1")

    def center(self) -> np.ndarray:
        """Camera position in world coordinates, -R^T t."""
        return -self.rotation.T @ self.translation

    def world_to_cam(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    def with_pose(self, rotation: np.ndarray, translation: np.ndarray,
                  id: Optional[str] = None) -> "Camera":
        return replace(self, rotation=rotation, translation=translation,
                       id=self.id if id is None else id)


@dataclass
class LabelMap:
    """Per-pixel object ids; 0 = unlabeled. ids is (H, W) nonnegative int32."""

    ids: np.ndarray

    def __post_init__(self):
        self.ids = np.ascontiguousarray(self.ids, dtype=np.int32)
        if self.ids.ndim != 2:
            raise ValueError("label map must be 2-D")
        if self.ids.size and self.ids.min() < 0:
            raise ValueError("label ids must be nonnegative")

    @property
    def shape(self):
        return self.ids.shape

    def present_labels(self) -> np.ndarray:
        """Sorted distinct nonzero ids."""
        u = np.unique(self.ids)
        return u[u != UNLABELED].astype(np.int64)

    def mask(self, label: int) -> np.ndarray:
        """Boolean mask of pixels carrying the given id."""
        return self.ids == label


@dataclass
class DepthMap:
    """Per-pixel depth along the camera ray; finite and nonnegative, float32."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError("depth map must be 2-D")
        if self.values.size and not (np.all(np.isfinite(self.values)) and self.values.min() >= 0):
            raise ValueError("depth values must be finite and nonnegative")

    @property
    def shape(self):
        return self.values.shape


@dataclass
class ViewRecord:
    """One observation: camera, photo, tracked label map, optional depth.

    image is (H, W, 3) float64 in [0, 1]. unocclusion maps label id -> (H, W)
    boolean unoccluded-region mask; filled in by occlusion analysis, None until
    then (treated as all-ones).
    """

    camera: Camera
    image: np.ndarray
    label_map: Optional[LabelMap] = None
    depth_map: Optional[DepthMap] = None
    unocclusion: Optional[dict] = None

    def __post_init__(self):
        self.image = np.ascontiguousarray(self.image, dtype=np.float64)
        if self.image.shape != (self.camera.height, self.camera.width, 3):
            raise ValueError("image dimensions must match the camera")
        if self.image.size and (self.image.min() < 0 or self.image.max() > 1):
            raise ValueError("image values must lie in [0, 1]")
        for part in (self.label_map, self.depth_map):
            if part is not None and part.shape != (self.camera.height, self.camera.width):
                raise ValueError("label/depth map dimensions must match the camera")
