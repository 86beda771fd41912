"""Training losses: photometric (L1 + SSIM) and the object-level label term.

Every loss returns its value together with an analytic gradient, since the
renderer's backward pass consumes per-pixel upstream gradients.

SSIM uses an 11x11 Gaussian window (sigma 1.5), stabilizers C1 = 0.01^2 and
C2 = 0.03^2, and averages over valid windows only. Its gradient is assembled
by adjoint convolutions of the per-window partials; the popular library
implementation returns a gradient scaled inconsistently with the value it
reports, which fails finite-difference checks, so both directions are done
by hand here.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.signal import convolve

from .rasterize import GradientBuffer, backward, render
from .scene import Camera, GaussianScene, LabelMap

SSIM_SIGMA = 1.5
SSIM_WINDOW = 11
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

_BLACK = np.zeros(3)


def l1_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean absolute error and its gradient w.r.t. pred."""
    if pred.shape != target.shape:
        raise ValueError("shape mismatch")
    diff = pred - target
    return float(np.abs(diff).mean()), np.sign(diff) / diff.size


def _ssim_kernel() -> np.ndarray:
    r = np.arange(SSIM_WINDOW) - (SSIM_WINDOW - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * SSIM_SIGMA ** 2))
    k = np.outer(g, g)
    return k / k.sum()


_KERNEL = _ssim_kernel()


def _ssim_channel(a: np.ndarray, b: np.ndarray, want_grad: bool):
    k = _KERNEL
    mu_a = convolve(a, k, mode="valid")
    mu_b = convolve(b, k, mode="valid")
    var_a = convolve(a * a, k, mode="valid") - mu_a ** 2
    var_b = convolve(b * b, k, mode="valid") - mu_b ** 2
    cov = convolve(a * b, k, mode="valid") - mu_a * mu_b

    n1 = 2.0 * mu_a * mu_b + SSIM_C1
    n2 = 2.0 * cov + SSIM_C2
    d1 = mu_a ** 2 + mu_b ** 2 + SSIM_C1
    d2 = var_a + var_b + SSIM_C2
    s = (n1 * n2) / (d1 * d2)
    if not want_grad:
        return s, None

    # Per-window partials of s, then the adjoint of the valid correlation
    # spreads them back onto pixels through the same window weights.
    ds_dmu_a = 2.0 * mu_b * n2 / (d1 * d2) - s * 2.0 * mu_a / d1
    ds_dvar_a = -s / d2
    ds_dcov = 2.0 * n1 / (d1 * d2)
    # mu_a, var_a, cov all depend on a(q):
    #   ds/da(q) = k(q-w) * [ds_dmu_a + 2 (a(q) - mu_a) ds_dvar_a + (b(q) - mu_b) ds_dcov]
    grad = (convolve(ds_dmu_a, k, mode="full")
            + 2.0 * a * convolve(ds_dvar_a, k, mode="full")
            - 2.0 * convolve(ds_dvar_a * mu_a, k, mode="full")
            + b * convolve(ds_dcov, k, mode="full")
            - convolve(ds_dcov * mu_b, k, mode="full"))
    return s, grad


def ssim_value(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM over valid windows; multichannel images average channels."""
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError("image smaller than the SSIM window")
    vals = [
        _ssim_channel(a[..., c], b[..., c], want_grad=False)[0].mean()
        for c in range(a.shape[2])
    ]
    return float(np.mean(vals))


def ssim_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """1 - mean SSIM and its gradient w.r.t. pred."""
    if pred.shape != target.shape:
        raise ValueError("shape mismatch")
    squeeze = pred.ndim == 2
    a = pred[..., None] if squeeze else pred
    b = target[..., None] if squeeze else target
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError("image smaller than the SSIM window")
    channels = a.shape[2]
    total = 0.0
    grad = np.zeros_like(a, dtype=np.float64)
    n_windows = (a.shape[0] - SSIM_WINDOW + 1) * (a.shape[1] - SSIM_WINDOW + 1)
    for c in range(channels):
        s, g = _ssim_channel(a[..., c], b[..., c], want_grad=True)
        total += s.mean()
        grad[..., c] = -g / (n_windows * channels)
    value = 1.0 - total / channels
    return float(value), (grad[..., 0] if squeeze else grad)


def photometric_loss(pred: np.ndarray, target: np.ndarray,
                     lambda1: float) -> Tuple[float, np.ndarray]:
    """(1 - lambda1) * L1 + lambda1 * (1 - SSIM), with gradient w.r.t. pred."""
    v1, g1 = l1_loss(pred, target)
    v2, g2 = ssim_loss(pred, target)
    return (1.0 - lambda1) * v1 + lambda1 * v2, (1.0 - lambda1) * g1 + lambda1 * g2


def _accumulate(into: GradientBuffer, other: GradientBuffer) -> None:
    into.d_means += other.d_means
    into.d_log_scales += other.d_log_scales
    into.d_rotations += other.d_rotations
    into.d_opacity_logits += other.d_opacity_logits
    into.d_colors += other.d_colors
    into.d_center_px += other.d_center_px


def zero_gradients(n: int) -> GradientBuffer:
    return GradientBuffer(
        d_means=np.zeros((n, 3)), d_log_scales=np.zeros((n, 3)),
        d_rotations=np.zeros((n, 4)), d_opacity_logits=np.zeros(n),
        d_colors=np.zeros((n, 3)), d_center_px=np.zeros((n, 2)),
    )


def label_loss(scene: GaussianScene, camera: Camera, image: np.ndarray,
               label_map: LabelMap, unocclusion: Optional[Dict[int, np.ndarray]],
               sample_labels: Iterable[int],
               want_grad: bool = True) -> Tuple[float, Optional[GradientBuffer], Dict]:
    """Object-level loss: for each sampled label k, the masked L1 between the
    label-k subset rendered over black and the photo restricted to k's mask,
    both further restricted to k's unoccluded region.

    Terms are summed over the sampled labels. Gradients flow only into
    label-k Gaussians of each term. Labels with no Gaussians contribute the
    target-versus-black L1 with zero gradient and are listed in diagnostics
    under "absent". unocclusion of None (or a missing key) means no occluder
    information: the all-ones mask.
    """
    H, W = camera.height, camera.width
    if image.shape != (H, W, 3):
        raise ValueError("image dimensions must match the camera")
    labels = [int(k) for k in sample_labels]
    if any(k <= 0 for k in labels):
        raise ValueError("sampled labels must be nonzero")

    total = 0.0
    grads = zero_gradients(len(scene)) if want_grad else None
    diag = {"absent": [], "terms": {}}
    present = set(scene.labels.tolist())
    for k in labels:
        u = None if unocclusion is None else unocclusion.get(k)
        u = np.ones((H, W), dtype=bool) if u is None else u.astype(bool)
        u3 = u[..., None]
        target = image * label_map.mask(k)[..., None] * u3
        if k not in present:
            term = float(np.abs(target).mean())
            total += term
            diag["absent"].append(k)
            diag["terms"][k] = term
            continue
        out, ctx = render(scene, camera, subset_labels={k},
                          with_context=True, background=_BLACK)
        pred = out.color * u3
        term, d_pred = l1_loss(pred, target)
        total += term
        diag["terms"][k] = term
        if want_grad:
            _accumulate(grads, backward(scene, camera, d_pred * u3, ctx=ctx))
    return total, grads, diag


def total_loss(scene: GaussianScene, camera: Camera, image: np.ndarray,
               label_map: Optional[LabelMap],
               unocclusion: Optional[Dict[int, np.ndarray]],
               sample_labels: Optional[List[int]],
               lambda1: float, lambda2: float):
    """Full objective: (1 - lambda1) L1 + lambda1 (1 - SSIM) on the complete
    render, plus lambda2 times the label term when sample_labels is given.

    Returns (value, GradientBuffer, parts) where parts holds the raw L1,
    SSIM loss, and label components for logging.
    """
    out, ctx = render(scene, camera, with_context=True)
    v1, g1 = l1_loss(out.color, image)
    v2, g2 = ssim_loss(out.color, image)
    d_pred = (1.0 - lambda1) * g1 + lambda1 * g2
    grads = backward(scene, camera, d_pred, ctx=ctx)
    value = (1.0 - lambda1) * v1 + lambda1 * v2
    parts = {"l1": v1, "ssim": v2, "label": 0.0}
    if sample_labels:
        if label_map is None:
            raise ValueError("label term requires a label map")
        v3, g3, diag = label_loss(scene, camera, image, label_map,
                                  unocclusion, sample_labels)
        value += lambda2 * v3
        parts["label"] = v3
        parts["label_diagnostics"] = diag
        g3.d_means *= lambda2
        g3.d_log_scales *= lambda2
        g3.d_rotations *= lambda2
        g3.d_opacity_logits *= lambda2
        g3.d_colors *= lambda2
        g3.d_center_px *= lambda2
        _accumulate(grads, g3)
    return value, grads, parts
