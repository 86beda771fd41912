"""Label-aware 3D Gaussian splatting on the CPU.

Differentiable tile rasterizer over labeled Gaussians, occlusion analysis of
tracked 2D masks, lifting of 2D labels onto 3D Gaussians, object-level
training loss, and object extraction, plus dataset i/o, metrics, a CLI and a
local HTTP viewer service.
"""

from .scene import (
    Camera,
    DepthMap,
    Gaussian3D,
    GaussianScene,
    LabelMap,
    UNLABELED,
    ViewRecord,
    covariance_of,
    quat_to_rotmat,
)
from .datasets import (
    SceneBundle,
    adopt_bundle_background,
    load_bundle,
    load_checkpoint,
    load_depth,
    save_bundle,
    save_checkpoint,
    save_depth,
    save_frame_sequence,
)
from .rasterize import RenderOutput, render, render_depth
from .occlusion import OcclusionResult, analyze_occlusion
from .lifting import (
    LabelVote,
    commit_votes,
    extract,
    lift_view,
    pick_labels,
)
from .losses import l1_loss, label_loss, photometric_loss, ssim_loss, ssim_value, total_loss
from .metrics import (
    evaluate_extraction,
    iou,
    miou,
    per_label_iou,
    predicted_label_map,
    psnr,
)
from .viewsynth import (
    PathCamera,
    PathFrame,
    densify_views,
    interpolate_cameras,
    interpolate_pair,
    retain_training_masks,
)
from .training import (
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    init_scene_from_views,
    train,
)
from .synthetic import (
    make_synthetic_scene,
    make_synthetic_views,
    observe,
    ring_cameras,
)

__all__ = [
    "Camera",
    "DepthMap",
    "Gaussian3D",
    "GaussianScene",
    "LabelMap",
    "LabelVote",
    "OcclusionResult",
    "PathCamera",
    "PathFrame",
    "RenderOutput",
    "SceneBundle",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "UNLABELED",
    "ViewRecord",
    "adopt_bundle_background",
    "analyze_occlusion",
    "commit_votes",
    "covariance_of",
    "densify_views",
    "evaluate_extraction",
    "extract",
    "init_scene_from_views",
    "interpolate_cameras",
    "interpolate_pair",
    "iou",
    "l1_loss",
    "label_loss",
    "lift_view",
    "load_bundle",
    "load_checkpoint",
    "load_depth",
    "make_synthetic_scene",
    "make_synthetic_views",
    "miou",
    "observe",
    "per_label_iou",
    "photometric_loss",
    "pick_labels",
    "predicted_label_map",
    "psnr",
    "quat_to_rotmat",
    "render",
    "render_depth",
    "retain_training_masks",
    "ring_cameras",
    "save_bundle",
    "save_checkpoint",
    "save_depth",
    "save_frame_sequence",
    "ssim_loss",
    "ssim_value",
    "total_loss",
    "train",
]

__version__ = "0.1.0"
