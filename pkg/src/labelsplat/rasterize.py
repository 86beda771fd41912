"""Tile-based splatting of labeled 3D Gaussians.

Pipeline: project Gaussians to screen-space splats (EWA), sort front-to-back,
bin into 16x16 pixel tiles by exact 3-sigma rectangles, then alpha-blend per
pixel. The backward pass retraces blending per pixel and chains screen-space
gradients through the projection analytically.

All blending semantics (clamps, skip threshold, early stop, support
truncation) live in _kernels and are shared with the naive test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from . import _kernels as K
from .scene import Camera, GaussianScene, quat_to_rotmat


@dataclass
class ProjectedSplats:
    """Screen-space splats for one camera; arrays indexed together.

    source_index maps each splat back to its Gaussian in the scene. cov2d is
    the projected covariance after the low-pass floor; conic holds the upper
    triangle (a, b, c) of its inverse. Culled Gaussians (behind the near
    plane, or with a degenerate projected covariance) are dropped and counted.
    """

    source_index: np.ndarray  # (M,) int64
    center: np.ndarray        # (M, 2) pixel coordinates
    cov2d: np.ndarray         # (M, 2, 2)
    conic: np.ndarray         # (M, 3) a, b, c
    depth: np.ndarray         # (M,) camera-space z
    color: np.ndarray         # (M, 3)
    opacity: np.ndarray       # (M,) post-sigmoid
    label: np.ndarray         # (M,) int32
    n_culled_near: int = 0
    n_culled_degenerate: int = 0

    def __len__(self) -> int:
        return self.source_index.shape[0]


@dataclass
class ContributionBuffer:
    """Per-pixel best contributor (max blend weight alpha*T, first wins ties).

    best_index is the Gaussian's scene index, -1 where nothing contributed.
    best_center is the best Gaussian's projected center rounded to the nearest
    pixel (row, col); center_ok says whether that pixel is inside the image,
    which is what the projection filter checks during label lifting.
    """

    best_index: np.ndarray   # (H, W) int64
    best_weight: np.ndarray  # (H, W) float64
    center_ok: np.ndarray    # (H, W) bool
    best_center: np.ndarray  # (H, W, 2) int64, (row, col); only valid where center_ok


@dataclass
class RenderOutput:
    """color is (H, W, 3) with background composited; alpha = 1 - final
    transmittance; label holds the best contributor's label (0 where none)."""

    color: np.ndarray
    alpha: np.ndarray
    label: np.ndarray
    contrib: ContributionBuffer


@dataclass
class RenderContext:
    """Forward state the backward pass replays: depth-sorted splat arrays,
    tile binning (CSR), per-pixel transmittance / last-contributor marks, and
    the background the forward composited over."""

    splats: ProjectedSplats          # sorted front-to-back
    offsets: np.ndarray              # (n_tiles + 1,) int64
    entries: np.ndarray              # (nnz,) int64 positions into sorted splats
    final_T: np.ndarray              # (H, W)
    last: np.ndarray                 # (H, W) int64, one past last accumulated entry
    depth_num: np.ndarray            # (H, W) sum of depth * weight
    background: np.ndarray           # (3,)
    n_tiles_x: int
    n_tiles_y: int
    scene_size: int


@dataclass
class GradientBuffer:
    """Parameter gradients aligned with the scene arrays; zero rows for
    Gaussians that were culled or never contributed. d_center_px is the
    screen-space positional gradient (pixels), kept for densification stats."""

    d_means: np.ndarray
    d_log_scales: np.ndarray
    d_rotations: np.ndarray
    d_opacity_logits: np.ndarray
    d_colors: np.ndarray
    d_center_px: np.ndarray


def project(scene: GaussianScene, camera: Camera,
            indices: Optional[np.ndarray] = None) -> ProjectedSplats:
    """EWA-project Gaussians to screen space.

    indices optionally restricts projection to a subset of the scene (in the
    given order); source_index always refers to the full scene. Gaussians with
    camera-space z <= NEAR_Z or a degenerate projected covariance are culled
    silently and counted in the result.
    """
    if indices is None:
        indices = np.arange(len(scene), dtype=np.int64)
    else:
        indices = np.asarray(indices, dtype=np.int64)

    means = scene.means[indices]
    z_all = means @ camera.rotation[2] + camera.translation[2]
    near_ok = z_all > K.NEAR_Z
    n_near = int(indices.size - near_ok.sum())

    idx = indices[near_ok]
    means = means[near_ok]
    t = means @ camera.rotation.T + camera.translation
    x, y, z = t[:, 0], t[:, 1], t[:, 2]

    cx = camera.fx * x / z + camera.cx
    cy = camera.fy * y / z + camera.cy

    # J W: top two rows of the projective Jacobian times world-to-camera.
    M = idx.size
    J = np.zeros((M, 2, 3))
    J[:, 0, 0] = camera.fx / z
    J[:, 0, 2] = -camera.fx * x / (z * z)
    J[:, 1, 1] = camera.fy / z
    J[:, 1, 2] = -camera.fy * y / (z * z)
    U = J @ camera.rotation

    R = quat_to_rotmat(scene.rotations[idx]) if M else np.zeros((0, 3, 3))
    S2 = np.exp(2.0 * scene.log_scales[idx])
    cov3d = np.einsum("nij,nj,nkj->nik", R, S2, R)
    cov2d = np.einsum("nij,njk,nlk->nil", U, cov3d, U)
    cov2d[:, 0, 0] += K.LOW_PASS
    cov2d[:, 1, 1] += K.LOW_PASS

    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    ok = np.isfinite(det) & (det > 0)
    ok &= np.isfinite(cov2d).all(axis=(1, 2)) & np.isfinite(cx) & np.isfinite(cy)
    n_degen = int(M - ok.sum())

    conic = np.empty((int(ok.sum()), 3))
    conic[:, 0] = cov2d[ok, 1, 1] / det[ok]
    conic[:, 1] = -cov2d[ok, 0, 1] / det[ok]
    conic[:, 2] = cov2d[ok, 0, 0] / det[ok]

    logits = scene.opacity_logits[idx[ok]]
    return ProjectedSplats(
        source_index=idx[ok],
        center=np.stack([cx[ok], cy[ok]], axis=1),
        cov2d=cov2d[ok],
        conic=conic,
        depth=z[ok],
        color=scene.colors[idx[ok]],
        opacity=1.0 / (1.0 + np.exp(-logits)),
        label=scene.labels[idx[ok]],
        n_culled_near=n_near,
        n_culled_degenerate=n_degen,
    )


def _sort_splats(sp: ProjectedSplats) -> ProjectedSplats:
    # Stable sort on depth = front-to-back, ties by ascending source order.
    order = np.argsort(sp.depth, kind="stable")
    return ProjectedSplats(
        source_index=sp.source_index[order], center=np.ascontiguousarray(sp.center[order]),
        cov2d=sp.cov2d[order], conic=np.ascontiguousarray(sp.conic[order]),
        depth=np.ascontiguousarray(sp.depth[order]), color=np.ascontiguousarray(sp.color[order]),
        opacity=np.ascontiguousarray(sp.opacity[order]), label=sp.label[order],
        n_culled_near=sp.n_culled_near, n_culled_degenerate=sp.n_culled_degenerate,
    )


def _bin_tiles(sp: ProjectedSplats, width: int, height: int,
               tile: int) -> Tuple[np.ndarray, np.ndarray, int, int]:
    n_tiles_x = (width + tile - 1) // tile
    n_tiles_y = (height + tile - 1) // tile
    # Exact axis-aligned extent of the 3-sigma ellipse: +-3 sqrt(var).
    rx = 3.0 * np.sqrt(sp.cov2d[:, 0, 0])
    ry = 3.0 * np.sqrt(sp.cov2d[:, 1, 1])
    tx0 = np.clip(np.floor((sp.center[:, 0] - rx) / tile), 0, n_tiles_x).astype(np.int64)
    tx1 = np.clip(np.floor((sp.center[:, 0] + rx) / tile) + 1, 0, n_tiles_x).astype(np.int64)
    ty0 = np.clip(np.floor((sp.center[:, 1] - ry) / tile), 0, n_tiles_y).astype(np.int64)
    ty1 = np.clip(np.floor((sp.center[:, 1] + ry) / tile) + 1, 0, n_tiles_y).astype(np.int64)

    counts = np.zeros(n_tiles_x * n_tiles_y, dtype=np.int64)
    K.count_tile_entries(tx0, tx1, ty0, ty1, n_tiles_x, counts)
    offsets = np.zeros(counts.size + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    entries = np.empty(int(offsets[-1]), dtype=np.int64)
    K.fill_tile_entries(tx0, tx1, ty0, ty1, n_tiles_x, offsets[:-1].copy(), entries)
    return offsets, entries, n_tiles_x, n_tiles_y


def _subset_indices(scene: GaussianScene, subset_labels: Optional[Iterable[int]]) -> Optional[np.ndarray]:
    if subset_labels is None:
        return None
    wanted = np.asarray(sorted(set(int(s) for s in subset_labels)), dtype=np.int64)
    return np.flatnonzero(np.isin(scene.labels, wanted)).astype(np.int64)


def render(scene: GaussianScene, camera: Camera,
           subset_labels: Optional[Iterable[int]] = None,
           with_context: bool = False,
           background: Optional[np.ndarray] = None,
           tile: int = K.TILE):
    """Render the scene (or the subset of Gaussians carrying the given
    labels) for a camera. Returns RenderOutput, or (RenderOutput,
    RenderContext) when with_context is set. background overrides the
    scene's background color (object-level losses composite over black).

    Restricting by subset_labels is bit-identical to extracting those
    Gaussians into a new scene and rendering that: the subset is filtered
    before projection, and ordering is preserved.
    """
    H, W = camera.height, camera.width
    bg = scene.background_color if background is None else np.asarray(background, dtype=np.float64)
    sp = _sort_splats(project(scene, camera, _subset_indices(scene, subset_labels)))
    offsets, entries, ntx, nty = _bin_tiles(sp, W, H, tile)

    out_color = np.zeros((H, W, 3))
    out_T = np.ones((H, W))
    out_last = np.zeros((H, W), dtype=np.int64)
    out_best = np.full((H, W), -1, dtype=np.int64)
    out_bestw = np.zeros((H, W))
    out_dnum = np.zeros((H, W))
    K.forward_tiles(H, W, tile, ntx, nty, offsets, entries,
                    sp.center, sp.conic, sp.opacity, sp.color, sp.depth,
                    bg, out_color, out_T, out_last,
                    out_best, out_bestw, out_dnum)

    has_best = out_best >= 0
    best_index = np.full((H, W), -1, dtype=np.int64)
    label = np.zeros((H, W), dtype=np.int32)
    best_center = np.zeros((H, W, 2), dtype=np.int64)
    center_ok = np.zeros((H, W), dtype=bool)
    if len(sp):
        safe = np.where(has_best, out_best, 0)
        best_index = np.where(has_best, sp.source_index[safe], -1)
        label = np.where(has_best, sp.label[safe], 0).astype(np.int32)
        bc = np.rint(sp.center).astype(np.int64)[safe]  # (H, W, 2) as (x, y)
        best_center[..., 0] = bc[..., 1]
        best_center[..., 1] = bc[..., 0]
        center_ok = (has_best & (bc[..., 0] >= 0) & (bc[..., 0] < W)
                     & (bc[..., 1] >= 0) & (bc[..., 1] < H))

    out = RenderOutput(
        color=out_color, alpha=1.0 - out_T, label=label,
        contrib=ContributionBuffer(best_index=best_index, best_weight=out_bestw,
                                   center_ok=center_ok, best_center=best_center),
    )
    if not with_context:
        return out
    ctx = RenderContext(splats=sp, offsets=offsets, entries=entries,
                        final_T=out_T, last=out_last, depth_num=out_dnum,
                        background=bg, n_tiles_x=ntx, n_tiles_y=nty,
                        scene_size=len(scene))
    return out, ctx


def render_depth(scene: GaussianScene, camera: Camera, far: float = 1e6,
                 subset_labels: Optional[Iterable[int]] = None) -> np.ndarray:
    """Alpha-weighted expected depth per pixel; pixels with accumulated alpha
    below MIN_COVERAGE get the finite far sentinel."""
    _, ctx = render(scene, camera, subset_labels=subset_labels, with_context=True)
    acc = 1.0 - ctx.final_T
    covered = acc >= K.MIN_COVERAGE
    depth = np.full(acc.shape, float(far))
    depth[covered] = ctx.depth_num[covered] / acc[covered]
    return depth


def _quat_rotmat_partials(q: np.ndarray) -> np.ndarray:
    """(N, 4, 3, 3) partial derivatives of R(q) w.r.t. the (already unit)
    quaternion components (w, x, y, z)."""
    w, x, y, z = q.T
    N = q.shape[0]
    P = np.zeros((N, 4, 3, 3))
    zero = np.zeros(N)
    P[:, 0] = np.stack([
        np.stack([zero, -2 * z, 2 * y], axis=1),
        np.stack([2 * z, zero, -2 * x], axis=1),
        np.stack([-2 * y, 2 * x, zero], axis=1)], axis=1)
    P[:, 1] = np.stack([
        np.stack([zero, 2 * y, 2 * z], axis=1),
        np.stack([2 * y, -4 * x, -2 * w], axis=1),
        np.stack([2 * z, 2 * w, -4 * x], axis=1)], axis=1)
    P[:, 2] = np.stack([
        np.stack([-4 * y, 2 * x, 2 * w], axis=1),
        np.stack([2 * x, zero, 2 * z], axis=1),
        np.stack([-2 * w, 2 * z, -4 * y], axis=1)], axis=1)
    P[:, 3] = np.stack([
        np.stack([-4 * z, -2 * w, 2 * x], axis=1),
        np.stack([2 * w, -4 * z, 2 * y], axis=1),
        np.stack([2 * x, 2 * y, zero], axis=1)], axis=1)
    return P


def backward(scene: GaussianScene, camera: Camera, d_color: np.ndarray,
             ctx: Optional[RenderContext] = None,
             subset_labels: Optional[Iterable[int]] = None,
             background: Optional[np.ndarray] = None) -> GradientBuffer:
    """Gradients of sum(d_color * rendered_color) w.r.t. all Gaussian
    parameters. ctx must come from a matching forward render; when omitted,
    the forward is rerun here with the same arguments.
    """
    if ctx is None:
        _, ctx = render(scene, camera, subset_labels=subset_labels,
                        with_context=True, background=background)
    sp = ctx.splats
    H, W = camera.height, camera.width
    d_color = np.ascontiguousarray(d_color, dtype=np.float64)
    if d_color.shape != (H, W, 3):
        raise ValueError("upstream gradient must be (H, W, 3)")

    nnz = ctx.entries.shape[0]
    g_color = np.zeros((nnz, 3))
    g_opac = np.zeros(nnz)
    g_conic = np.zeros((nnz, 3))
    g_center = np.zeros((nnz, 2))
    K.backward_tiles(H, W, K.TILE, ctx.n_tiles_x, ctx.n_tiles_y,
                     ctx.offsets, ctx.entries,
                     sp.center, sp.conic, sp.opacity, sp.color,
                     ctx.background, ctx.final_T, ctx.last, d_color,
                     g_color, g_opac, g_conic, g_center)

    # Entry rows -> per-splat gradients, reduced in fixed entry order.
    M = len(sp)
    s_color = np.zeros((M, 3))
    s_opac = np.zeros(M)
    s_conic = np.zeros((M, 3))
    s_center = np.zeros((M, 2))
    np.add.at(s_color, ctx.entries, g_color)
    np.add.at(s_opac, ctx.entries, g_opac)
    np.add.at(s_conic, ctx.entries, g_conic)
    np.add.at(s_center, ctx.entries, g_center)

    grads = GradientBuffer(
        d_means=np.zeros((ctx.scene_size, 3)),
        d_log_scales=np.zeros((ctx.scene_size, 3)),
        d_rotations=np.zeros((ctx.scene_size, 4)),
        d_opacity_logits=np.zeros(ctx.scene_size),
        d_colors=np.zeros((ctx.scene_size, 3)),
        d_center_px=np.zeros((ctx.scene_size, 2)),
    )
    if M == 0:
        return grads

    # Screen-space -> parameter chain, vectorized over splats.
    src = sp.source_index
    Kmat = np.empty((M, 2, 2))
    Kmat[:, 0, 0] = sp.conic[:, 0]
    Kmat[:, 0, 1] = Kmat[:, 1, 0] = sp.conic[:, 1]
    Kmat[:, 1, 1] = sp.conic[:, 2]
    Gc = np.empty((M, 2, 2))
    Gc[:, 0, 0] = s_conic[:, 0]
    Gc[:, 0, 1] = Gc[:, 1, 0] = 0.5 * s_conic[:, 1]
    Gc[:, 1, 1] = s_conic[:, 2]
    # conic = inv(cov2d): dL/dcov2d = -K dL/dconic K.
    G2 = -Kmat @ Gc @ Kmat

    mean_cam = scene.means[src] @ camera.rotation.T + camera.translation
    x, y, z = mean_cam[:, 0], mean_cam[:, 1], mean_cam[:, 2]
    J = np.zeros((M, 2, 3))
    J[:, 0, 0] = camera.fx / z
    J[:, 0, 2] = -camera.fx * x / (z * z)
    J[:, 1, 1] = camera.fy / z
    J[:, 1, 2] = -camera.fy * y / (z * z)
    Umat = J @ camera.rotation

    Rq = quat_to_rotmat(scene.rotations[src])
    S = np.exp(scene.log_scales[src])
    Mmat = Rq * S[:, None, :]
    cov3d = Mmat @ Mmat.transpose(0, 2, 1)

    dSigma = np.einsum("nji,njk,nkl->nil", Umat, G2, Umat)
    dU = 2.0 * np.einsum("nij,njk,nkl->nil", G2, Umat, cov3d)
    dJ = np.einsum("nij,kj->nik", dU, camera.rotation)

    # Covariance chain: Sigma = M M^T, M = R diag(exp(s)).
    dM = 2.0 * dSigma @ Mmat
    dS_diag = np.einsum("nji,nji->ni", Rq, dM)  # diag(R^T dM)
    d_log_scale = dS_diag * S
    dR = dM * S[:, None, :]
    P = _quat_rotmat_partials(scene.rotations[src])
    d_q = np.einsum("nqij,nij->nq", P, dR)
    # Forward normalizes q, so project out the radial direction.
    qn = scene.rotations[src]
    d_q -= qn * np.einsum("nq,nq->n", qn, d_q)[:, None]

    # Mean chain: screen center + Jacobian entries, then world frame.
    inv_z = 1.0 / z
    d_cam = np.zeros((M, 3))
    d_cam[:, 0] = s_center[:, 0] * camera.fx * inv_z
    d_cam[:, 1] = s_center[:, 1] * camera.fy * inv_z
    d_cam[:, 2] = (-s_center[:, 0] * camera.fx * x * inv_z ** 2
                   - s_center[:, 1] * camera.fy * y * inv_z ** 2)
    d_cam[:, 0] += dJ[:, 0, 2] * (-camera.fx * inv_z ** 2)
    d_cam[:, 1] += dJ[:, 1, 2] * (-camera.fy * inv_z ** 2)
    d_cam[:, 2] += (dJ[:, 0, 0] * (-camera.fx * inv_z ** 2)
                    + dJ[:, 0, 2] * (2.0 * camera.fx * x * inv_z ** 3)
                    + dJ[:, 1, 1] * (-camera.fy * inv_z ** 2)
                    + dJ[:, 1, 2] * (2.0 * camera.fy * y * inv_z ** 3))
    d_mean = d_cam @ camera.rotation

    o = sp.opacity
    grads.d_means[src] = d_mean
    grads.d_log_scales[src] = d_log_scale
    grads.d_rotations[src] = d_q
    grads.d_opacity_logits[src] = s_opac * o * (1.0 - o)
    grads.d_colors[src] = s_color
    grads.d_center_px[src] = s_center
    return grads
