"""Reconstruction and segmentation quality metrics."""

from __future__ import annotations

from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .lifting import extract
from .losses import ssim_value
from .rasterize import render
from .scene import Camera, GaussianScene, LabelMap, ViewRecord


def psnr(pred: np.ndarray, target: np.ndarray,
         mask: Optional[np.ndarray] = None) -> float:
    """Peak signal-to-noise ratio over [0, 1] images, in dB.

    mask, if given, restricts the mean squared error to the selected pixels
    (all channels of each). Identical inputs give +inf.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff2 = (pred - target) ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != pred.shape[:2]:
            raise ValueError("mask shape must match image height and width")
        if not mask.any():
            raise ValueError("mask selects no pixels")
        diff2 = diff2[mask]
    mse = float(np.mean(diff2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def iou(pred_mask: np.ndarray, gt_mask: np.ndarray) -> float:
    """Intersection over union of two boolean masks; two empty masks agree
    perfectly (1.0)."""
    pred_mask = np.asarray(pred_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    if pred_mask.shape != gt_mask.shape:
        raise ValueError("mask shape mismatch")
    union = np.logical_or(pred_mask, gt_mask).sum()
    if union == 0:
        return 1.0
    inter = np.logical_and(pred_mask, gt_mask).sum()
    return float(inter) / float(union)


def miou(pred_labels: np.ndarray, gt_labels: np.ndarray,
         labels: Optional[Iterable[int]] = None) -> float:
    """Mean IoU over object labels (label 0 is background and never scored).

    labels defaults to every nonzero label present in the ground truth.
    """
    pred_labels = np.asarray(pred_labels)
    gt_labels = np.asarray(gt_labels)
    if pred_labels.shape != gt_labels.shape:
        raise ValueError("label map shape mismatch")
    if labels is None:
        labels = [int(v) for v in np.unique(gt_labels) if v != 0]
    labels = list(labels)
    if not labels:
        raise ValueError("no labels to score")
    return float(np.mean([iou(pred_labels == k, gt_labels == k)
                          for k in labels]))


def per_label_iou(pred_labels: np.ndarray, gt_labels: np.ndarray) -> Dict[int, float]:
    """IoU per ground-truth label, for diagnostics."""
    gt_labels = np.asarray(gt_labels)
    out = {}
    for k in np.unique(gt_labels):
        if k == 0:
            continue
        out[int(k)] = iou(np.asarray(pred_labels) == k, gt_labels == k)
    return out


def predicted_label_map(scene: GaussianScene, camera: Camera,
                        alpha_threshold: float = 0.5) -> np.ndarray:
    """Label map a trained scene implies for a view: the best contributor's
    label where the render actually covers the pixel, background elsewhere."""
    out = render(scene, camera)
    return np.where(out.alpha > alpha_threshold, out.label, 0).astype(np.int32)


def evaluate_extraction(scene: GaussianScene, views: Sequence[ViewRecord],
                        labels: Optional[Iterable[int]] = None,
                        alpha_threshold: float = 0.5) -> Dict:
    """Object-level quality of a labeled scene on held-out views.

    Per object: its extracted subset is rendered alone; the coverage mask
    (accumulated alpha > alpha_threshold) is scored by IoU against the view's
    ground-truth visibility mask, and masked PSNR compares the subset render
    to the photo inside that ground-truth mask. Views where the object is
    absent from both masks count as IoU 1 and contribute no PSNR sample.
    Whole-frame PSNR/SSIM of the full render are reported alongside.
    """
    if not views:
        raise ValueError("no views to evaluate")
    if labels is None:
        labels = [int(k) for k in np.unique(scene.labels) if k != 0]
    labels = sorted(set(int(k) for k in labels))
    if not labels:
        raise ValueError("no labels to evaluate")

    view_psnr, view_ssim = [], []
    for v in views:
        out = render(scene, v.camera)
        view_psnr.append(psnr(out.color, v.image))
        view_ssim.append(ssim_value(out.color, v.image))

    per_object = {}
    for k in labels:
        sub = extract(scene, {k})
        ious, masked = [], []
        for v in views:
            gt = v.label_map.mask(k)
            if len(sub) == 0:
                ious.append(iou(np.zeros_like(gt), gt))
            else:
                out = render(sub, v.camera)
                ious.append(iou(out.alpha > alpha_threshold, gt))
                if gt.any():
                    masked.append(psnr(out.color, v.image, mask=gt))
        per_object[k] = {
            "iou": float(np.mean(ious)),
            "masked_psnr": float(np.mean(masked)) if masked else None,
            "gaussians": int(np.sum(scene.labels == k)),
        }
    return {
        "per_object": per_object,
        "miou": float(np.mean([r["iou"] for r in per_object.values()])),
        "psnr": float(np.mean(view_psnr)),
        "ssim": float(np.mean(view_ssim)),
        "views": len(views),
    }


__all__ = ["psnr", "iou", "miou", "per_label_iou", "predicted_label_map",
           "evaluate_extraction", "ssim_value"]
