"""Scene optimization with in-training label lifting.

Each step renders one view, applies the photometric objective, and (once the
label phase begins) lifts label votes from that view's mask and adds the
occlusion-masked object-level term over a random sample of its objects.
Adaptive density control clones small high-gradient Gaussians, splits large
ones, and prunes near-transparent ones; the Adam moment rows follow the
Gaussian rows through both.

Everything downstream of the seed is deterministic for a fixed config: one
generator drives initialization, view order, mask sampling, and split
sampling, and gradient reductions do not depend on thread count.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .lifting import commit_votes, lift_view
from .losses import _accumulate, l1_loss, label_loss, ssim_loss
from .occlusion import analyze_occlusion
from .rasterize import backward, render, render_depth
from .scene import (Camera, DepthMap, GaussianScene, LabelMap, UNLABELED,
                    ViewRecord, quat_to_rotmat)

# Reference schedule length; shorter runs scale the phase boundaries.
SCHEDULE_ITERATIONS = 15000

# Depth-seeded init skips pixels at or beyond this distance (far sentinels).
FAR_DEPTH_CUTOFF = 1e5

_PARAM_NAMES = ("means", "log_scales", "rotations", "opacity_logits", "colors")


@dataclass
class TrainConfig:
    iterations: int = SCHEDULE_ITERATIONS
    lambda1: float = 0.2           # SSIM share of the photometric term
    lambda2: float = 0.1           # weight of the object-level term
    label_start: int = 1000        # first iteration that lifts labels and applies the label term
    masks_per_iter: int = 10       # object masks sampled per step
    lift_threshold: float = 0.6    # best-contributor weight a vote must exceed
    gpf_enabled: bool = True       # projection-consistency filter on votes
    oam_enabled: bool = True       # occlusion-aware masking of the label term
    dov_enabled: bool = True       # provenance: masks came from a densified
                                   # view sequence; preparation happens
                                   # upstream of the optimizer, so the loop
                                   # never reads this, but run configs must
                                   # record which pipeline produced the masks
    min_boundary: int = 8          # occlusion analysis: shared-edge threshold
    depth_tol: float = 0.0         # occlusion analysis: relative depth margin
    densify_interval: int = 200
    densify_until: int = 10000     # last iteration eligible for density control
    densify_grad_threshold: float = 2e-4   # mean screen-space gradient (NDC units)
    densify_percent: float = 0.01  # of scene extent; splits above, clones below
    prune_opacity: float = 0.005
    opacity_reset_interval: int = 3000  # 0 disables; clamps opacity down so the
                                        # load-bearing Gaussians regrow dominant
                                        # and the rest fall to the prune floor
    lr_means: float = 1.6e-4       # scaled by scene extent, decayed to lr_means_final
    lr_means_final: float = 1.6e-6
    lr_colors: float = 2.5e-3
    lr_opacity: float = 0.05
    lr_scales: float = 5e-3
    lr_rotations: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-15
    init_points: int = 2000
    background: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0

    def validate(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not (0.0 <= self.lambda1 <= 1.0):
            raise ValueError("lambda1 must lie in [0, 1]")
        if self.lambda2 < 0.0:
            raise ValueError("lambda2 must be nonnegative")
        if not (0.0 <= self.lift_threshold < 1.0):
            raise ValueError("lift_threshold must lie in [0, 1)")
        if self.masks_per_iter < 0:
            raise ValueError("masks_per_iter must be nonnegative")
        if self.label_start < 0:
            raise ValueError("label_start must be nonnegative")
        if self.densify_interval < 1:
            raise ValueError("densify_interval must be positive")
        if self.init_points < 1:
            raise ValueError("init_points must be positive")

    @classmethod
    def for_iterations(cls, iterations: int, **overrides) -> "TrainConfig":
        """Defaults follow the reference schedule; shorter or longer runs
        scale the phase boundaries proportionally. The densify cadence keeps
        its absolute interval (scaling it would change step sizes, not just
        phase lengths)."""
        s = iterations / SCHEDULE_ITERATIONS
        scaled = dict(
            iterations=iterations,
            label_start=max(1, round(cls.label_start * s)),
            densify_until=round(cls.densify_until * s),
            opacity_reset_interval=max(1, round(cls.opacity_reset_interval * s)),
        )
        scaled.update(overrides)
        return cls(**scaled)


class Adam:
    """Adam over named parameter arrays.

    Moment rows track Gaussian rows: density control filters them with
    keep_rows and appends zero-moment rows with append_rows, so state stays
    aligned with the scene as it grows and shrinks.
    """

    def __init__(self, shapes: Dict[str, Tuple[int, ...]],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-15):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
             lrs: Dict[str, float]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= lrs[name] * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def keep_rows(self, keep: np.ndarray) -> None:
        for state in (self.m, self.v):
            for k in state:
                state[k] = state[k][keep]

    def append_rows(self, n: int) -> None:
        for state in (self.m, self.v):
            for k in state:
                state[k] = np.concatenate(
                    [state[k], np.zeros((n,) + state[k].shape[1:])], axis=0)


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss or gradient appears; carries diagnostics."""

    def __init__(self, message: str, diagnostics: Dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class TrainResult:
    scene: GaussianScene
    metrics: List[Dict]
    extent: float
    unocclusion: Dict[int, Dict[int, np.ndarray]]  # view index -> label -> mask


def scene_extent(cameras: Sequence[Camera]) -> float:
    """Radius of the camera rig: max distance of any camera center from the
    rig centroid, padded 10%. A single camera (or a degenerate rig) gets 1.0
    so learning rates stay finite."""
    centers = np.stack([c.center() for c in cameras])
    radius = float(np.max(np.linalg.norm(centers - centers.mean(axis=0), axis=1)))
    return 1.1 * radius if radius > 1e-9 else 1.0


def means_lr(config: TrainConfig, extent: float, iteration: int) -> float:
    """Exponential decay from lr_means to lr_means_final over the run, both
    scaled by the scene extent."""
    t = iteration / config.iterations
    return extent * config.lr_means * (config.lr_means_final / config.lr_means) ** t


def sample_masks(label_map: LabelMap, count: int, rng: np.random.Generator) -> List[int]:
    """Up to count distinct object labels from the map, uniform without
    replacement, returned sorted (term order affects float accumulation)."""
    present = label_map.present_labels()
    if count <= 0 or present.size == 0:
        return []
    k = min(count, present.size)
    pick = rng.choice(present, size=k, replace=False)
    return sorted(int(v) for v in pick)


def _knn_log_scales(points: np.ndarray) -> np.ndarray:
    """Isotropic log-scales from mean distance to the 3 nearest neighbors."""
    n = len(points)
    if n < 2:
        return np.full((n, 3), math.log(0.1))
    k = min(4, n)
    dist, _ = cKDTree(points).query(points, k=k)
    mean_nn = dist[:, 1:].mean(axis=1)
    return np.log(np.clip(mean_nn, 1e-4, None))[:, None].repeat(3, axis=1)


def init_scene_from_views(views: Sequence[ViewRecord], n_points: int,
                          rng: np.random.Generator,
                          background: Tuple[float, float, float]) -> GaussianScene:
    """Seed the scene by unprojecting random pixels of views that carry depth
    (color from the photo, label unset); without any depth, scatter points
    around the rig's mean look-at region instead."""
    with_depth = [v for v in views if v.depth_map is not None]
    pts, cols = [], []
    if with_depth:
        per = -(-n_points // len(with_depth))  # ceil
        for v in with_depth:
            D = v.depth_map.values.astype(np.float64)
            H, W = D.shape
            valid = np.flatnonzero((D.ravel() > 0) & (D.ravel() < FAR_DEPTH_CUTOFF))
            if valid.size == 0:
                continue
            take = min(per, valid.size)
            pick = rng.choice(valid, size=take, replace=False)
            r, c = np.divmod(pick, W)
            d = D[r, c]
            cam = v.camera
            x = (c - cam.cx) / cam.fx * d
            y = (r - cam.cy) / cam.fy * d
            p_cam = np.column_stack([x, y, d])
            pts.append((p_cam - cam.translation) @ cam.rotation)
            cols.append(v.image[r, c])
    if pts:
        points = np.concatenate(pts)[:n_points]
        colors = np.concatenate(cols)[:n_points]
    else:
        cams = [v.camera for v in views]
        centers = np.stack([c.center() for c in cams])
        forward = np.stack([c.rotation.T @ np.array([0.0, 0.0, 1.0]) for c in cams])
        # nearest point to all optical axes; an inward-facing rig converges
        # there, a degenerate rig (parallel axes) falls back to a step ahead
        A = np.zeros((3, 3))
        b = np.zeros(3)
        for c, f in zip(centers, forward):
            P = np.eye(3) - np.outer(f, f)
            A += P
            b += P @ c
        if np.linalg.eigvalsh(A)[0] > 1e-6:
            target = np.linalg.solve(A, b)
        else:
            target = (centers + forward).mean(axis=0)
        spread = float(np.median(np.linalg.norm(centers - target, axis=1)))
        points = target + 0.25 * max(spread, 1.0) * rng.normal(size=(n_points, 3))
        colors = rng.random((n_points, 3))
    n = len(points)
    quats = np.zeros((n, 4))
    quats[:, 0] = 1.0
    return GaussianScene(
        means=points,
        log_scales=_knn_log_scales(points),
        rotations=quats,
        opacity_logits=np.full(n, math.log(0.1 / 0.9)),
        colors=np.clip(colors, 0.0, 1.0),
        labels=np.zeros(n, dtype=np.int32),
        background_color=np.asarray(background, dtype=np.float64),
    )


def _params(scene: GaussianScene) -> Dict[str, np.ndarray]:
    return {name: getattr(scene, name) for name in _PARAM_NAMES}


def _grad_dict(grads) -> Dict[str, np.ndarray]:
    return {
        "means": grads.d_means, "log_scales": grads.d_log_scales,
        "rotations": grads.d_rotations, "opacity_logits": grads.d_opacity_logits,
        "colors": grads.d_colors,
    }


@dataclass
class DensifyStats:
    """Accumulated screen-space gradient norms per Gaussian (NDC units) and
    the number of steps each Gaussian was inside the frustum."""

    grad_accum: np.ndarray
    seen: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "DensifyStats":
        return cls(np.zeros(n), np.zeros(n, dtype=np.int64))

    def update(self, grads, visible: np.ndarray, camera: Camera) -> None:
        ndc = grads.d_center_px * np.array([camera.width / 2.0, camera.height / 2.0])
        self.grad_accum[visible] += np.linalg.norm(ndc[visible], axis=1)
        self.seen[visible] += 1


def densify_and_prune(scene: GaussianScene, opt: Adam, stats: DensifyStats,
                      config: TrainConfig, extent: float,
                      rng: np.random.Generator) -> Tuple[GaussianScene, DensifyStats, Dict[str, int]]:
    """One density-control pass.

    Gaussians whose mean screen-space gradient exceeds the threshold are
    cloned in place when small (vs densify_percent of the extent) or replaced
    by two samples from their own distribution with scales shrunk 1.6x when
    large. Children inherit the parent's label and vote weight. Afterwards
    anything with opacity below prune_opacity is dropped. Adam moments follow:
    kept rows keep their state, new rows start at zero.
    """
    avg = np.divide(stats.grad_accum, np.maximum(stats.seen, 1))
    hot = avg > config.densify_grad_threshold
    size = np.exp(scene.log_scales).max(axis=1)
    small = size <= config.densify_percent * extent
    clone_idx = np.flatnonzero(hot & small)
    split_idx = np.flatnonzero(hot & ~small)

    keep = np.ones(len(scene), dtype=bool)
    keep[split_idx] = False

    pieces = [scene.subset(np.flatnonzero(keep))]
    if clone_idx.size:
        pieces.append(scene.subset(clone_idx))
    if split_idx.size:
        parents = scene.subset(split_idx)
        rows = []
        for _ in range(2):
            eps = rng.normal(size=(len(parents), 3))
            R = quat_to_rotmat(parents.rotations)
            offset = np.einsum("nij,nj->ni", R, np.exp(parents.log_scales) * eps)
            child = parents.subset(np.arange(len(parents)))
            child.means = parents.means + offset
            child.log_scales = parents.log_scales - math.log(1.6)
            rows.append(child)
        pieces.extend(rows)

    merged = GaussianScene(
        means=np.concatenate([p.means for p in pieces]),
        log_scales=np.concatenate([p.log_scales for p in pieces]),
        rotations=np.concatenate([p.rotations for p in pieces]),
        opacity_logits=np.concatenate([p.opacity_logits for p in pieces]),
        colors=np.concatenate([p.colors for p in pieces]),
        labels=np.concatenate([p.labels for p in pieces]),
        background_color=scene.background_color.copy(),
        label_weights=np.concatenate([p.label_weights for p in pieces]),
    )
    opt.keep_rows(keep)
    opt.append_rows(clone_idx.size + 2 * split_idx.size)

    alive = merged.opacities() >= config.prune_opacity
    pruned = int((~alive).sum())
    if pruned:
        merged = merged.subset(np.flatnonzero(alive))
        opt.keep_rows(alive)

    info = {"cloned": int(clone_idx.size), "split": int(split_idx.size),
            "pruned": pruned, "total": len(merged)}
    return merged, DensifyStats.zeros(len(merged)), info


OPACITY_RESET_CEILING = 0.01


def reset_opacity(scene: GaussianScene, opt: Adam) -> None:
    """Clamp every opacity down to the reset ceiling and clear the opacity
    moments. Gaussians the photometric loss still needs regrow within a few
    steps and end up dominant; abandoned ones drift under the prune floor."""
    ceiling = math.log(OPACITY_RESET_CEILING / (1.0 - OPACITY_RESET_CEILING))
    np.minimum(scene.opacity_logits, ceiling, out=scene.opacity_logits)
    opt.m["opacity_logits"][:] = 0.0
    opt.v["opacity_logits"][:] = 0.0


def _finite(grads) -> bool:
    return all(np.all(np.isfinite(a)) for a in _grad_dict(grads).values())


def train(views: Sequence[ViewRecord], config: TrainConfig,
          initial_scene: Optional[GaussianScene] = None,
          out_dir: Optional[str] = None,
          progress: Optional[Callable[[int, Dict], None]] = None) -> TrainResult:
    """Optimize a scene against the given views.

    Writes one JSON line per iteration to out_dir/metrics.jsonl when out_dir
    is given (identical runs produce identical bytes). Returns the final
    scene, the metric records, the rig extent, and the unocclusion maps the
    label term used per view.
    """
    config.validate()
    if not views:
        raise ValueError("no training views")
    rng = np.random.default_rng(config.seed)
    cams = [v.camera for v in views]
    extent = scene_extent(cams)
    if initial_scene is None:
        scene = init_scene_from_views(views, config.init_points, rng, config.background)
    else:
        scene = initial_scene.copy()
    opt = Adam({k: v.shape for k, v in _params(scene).items()},
               config.adam_beta1, config.adam_beta2, config.adam_eps)
    stats = DensifyStats.zeros(len(scene))
    unocc_cache: Dict[int, Dict[int, np.ndarray]] = {}
    metrics: List[Dict] = []
    log_file = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_file = open(os.path.join(out_dir, "metrics.jsonl"), "w")

    epoch: List[int] = []
    try:
        for it in range(1, config.iterations + 1):
            if not epoch:
                epoch = list(rng.permutation(len(views)))
            vi = int(epoch.pop())
            view = views[vi]
            cam = view.camera

            out, ctx = render(scene, cam, with_context=True)
            v1, g1 = l1_loss(out.color, view.image)
            v2, g2 = ssim_loss(out.color, view.image)
            d_pred = (1.0 - config.lambda1) * g1 + config.lambda1 * g2
            grads = backward(scene, cam, d_pred, ctx=ctx)

            label_val = 0.0
            lifted = 0
            in_label_phase = it >= config.label_start and view.label_map is not None
            if in_label_phase:
                votes = lift_view(scene, cam, view.label_map,
                                  threshold=config.lift_threshold,
                                  gpf_enabled=config.gpf_enabled,
                                  render_output=out)
                lifted = commit_votes(scene, votes)
                sample = sample_masks(view.label_map, config.masks_per_iter, rng)
                if sample and config.lambda2 > 0.0:
                    u = _unocclusion_for(view, vi, scene, unocc_cache, config)
                    v3, g3, _ = label_loss(scene, cam, view.image,
                                           view.label_map, u, sample)
                    label_val = v3
                    for arr in _grad_dict(g3).values():
                        arr *= config.lambda2
                    g3.d_center_px *= config.lambda2
                    _accumulate(grads, g3)

            value = (1.0 - config.lambda1) * v1 + config.lambda1 * v2 \
                + config.lambda2 * label_val
            if not (np.isfinite(value) and _finite(grads)):
                diag = {"iteration": it, "view": cam.id, "value": value,
                        "gaussians": len(scene)}
                raise TrainingDiverged(f"non-finite loss at iteration {it}", diag)

            stats.update(grads, ctx.splats.source_index, cam)
            lrs = {"means": means_lr(config, extent, it),
                   "log_scales": config.lr_scales,
                   "rotations": config.lr_rotations,
                   "opacity_logits": config.lr_opacity,
                   "colors": config.lr_colors}
            opt.step(_params(scene), _grad_dict(grads), lrs)
            norms = np.linalg.norm(scene.rotations, axis=1, keepdims=True)
            scene.rotations /= np.maximum(norms, 1e-12)
            np.clip(scene.colors, 0.0, 1.0, out=scene.colors)

            record = {
                "iteration": it,
                "l1": float(v1),
                "ssim_loss": float(v2),
                "label": float(label_val),
                "total": float(value),
                "gaussians": len(scene),
                "labeled_fraction": float(np.mean(scene.labels != UNLABELED)),
                "lifted": int(lifted),
            }
            if it % config.densify_interval == 0 and it <= config.densify_until:
                scene, stats, info = densify_and_prune(
                    scene, opt, stats, config, extent, rng)
                record.update(info)
            if (config.opacity_reset_interval > 0
                    and it % config.opacity_reset_interval == 0
                    and it <= config.densify_until):
                reset_opacity(scene, opt)
                record["opacity_reset"] = 1
            metrics.append(record)
            if log_file is not None:
                log_file.write(json.dumps(record, separators=(",", ":")) + "\n")
            if progress is not None:
                progress(it, record)
    finally:
        if log_file is not None:
            log_file.close()
    return TrainResult(scene=scene, metrics=metrics, extent=extent,
                       unocclusion=unocc_cache)


def _unocclusion_for(view: ViewRecord, view_index: int, scene: GaussianScene,
                     cache: Dict[int, Dict[int, np.ndarray]],
                     config: TrainConfig) -> Optional[Dict[int, np.ndarray]]:
    """Unoccluded-region masks for a view's labels, or None when masking is
    disabled. Computed once per view from the view's depth map (or, lacking
    one, depth rendered from the current scene) and cached; records that
    arrive with precomputed maps keep them."""
    if not config.oam_enabled:
        return None
    if view.unocclusion is not None:
        return view.unocclusion
    got = cache.get(view_index)
    if got is None:
        if view.depth_map is not None:
            depth = view.depth_map
        else:
            depth = DepthMap(render_depth(scene, view.camera,
                                          far=float(FAR_DEPTH_CUTOFF)))
        result = analyze_occlusion(view.label_map, depth,
                                   min_boundary=config.min_boundary,
                                   depth_tol=config.depth_tol)
        got = result.unocclusion
        cache[view_index] = got
    return got
