"""Slow independent reference implementations used to cross-check fast paths.

The renderer oracle evaluates every splat at every pixel (no tiles, no
rectangles), projects with scipy rotations and per-splat scalar math, and
replaces the sequential front-to-back loop with transmittance-cumprod
algebra. Blend semantics (support truncation, clamps, skip and stop
thresholds) are part of the rendering contract and therefore shared.
"""

import numpy as np
from scipy.spatial.transform import Rotation

ALPHA_MAX = 0.99
ALPHA_MIN = 1.0 / 255.0
T_STOP = 1e-4
SUPPORT_M2 = 9.0
NEAR_Z = 0.01
LOW_PASS = 0.3
MIN_COVERAGE = 1e-3


def naive_render(scene, camera, subset_labels=None, far=1e6):
    """Reference full-frame render. Returns a dict with color, alpha, label,
    best_index, best_weight, and expected depth."""
    H, W = camera.height, camera.width

    if subset_labels is None:
        cand = list(range(len(scene)))
    else:
        wanted = {int(v) for v in subset_labels}
        cand = [i for i in range(len(scene)) if int(scene.labels[i]) in wanted]

    splats = []
    for i in cand:
        q = scene.rotations[i]
        R3 = Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()
        s = np.exp(scene.log_scales[i])
        cov3 = R3 @ np.diag(s * s) @ R3.T
        t = camera.rotation @ scene.means[i] + camera.translation
        if t[2] <= NEAR_Z:
            continue
        x, y, z = t
        J = np.array([
            [camera.fx / z, 0.0, -camera.fx * x / z ** 2],
            [0.0, camera.fy / z, -camera.fy * y / z ** 2],
        ])
        U = J @ camera.rotation
        cov2 = U @ cov3 @ U.T + LOW_PASS * np.eye(2)
        det = np.linalg.det(cov2)
        if not np.isfinite(det) or det <= 0:
            continue
        Kc = np.linalg.inv(cov2)
        cx = camera.fx * x / z + camera.cx
        cy = camera.fy * y / z + camera.cy
        o = 1.0 / (1.0 + np.exp(-scene.opacity_logits[i]))
        xs = np.arange(W, dtype=np.float64)[None, :] - cx
        ys = np.arange(H, dtype=np.float64)[:, None] - cy
        m2 = Kc[0, 0] * xs ** 2 + 2.0 * Kc[0, 1] * xs * ys + Kc[1, 1] * ys ** 2
        a = np.minimum(o * np.exp(-0.5 * m2), ALPHA_MAX)
        a[m2 > SUPPORT_M2] = 0.0
        a[a < ALPHA_MIN] = 0.0
        splats.append((float(z), int(i), a, scene.colors[i].copy(),
                       int(scene.labels[i]), (cx, cy)))

    order = sorted(range(len(splats)), key=lambda j: (splats[j][0], splats[j][1]))
    bg = scene.background_color
    if not order:
        return {
            "color": np.broadcast_to(bg, (H, W, 3)).copy(),
            "alpha": np.zeros((H, W)),
            "label": np.zeros((H, W), dtype=np.int32),
            "best_index": np.full((H, W), -1, dtype=np.int64),
            "best_weight": np.zeros((H, W)),
            "depth": np.full((H, W), float(far)),
        }

    A = np.stack([splats[j][2] for j in order])
    cols = np.stack([splats[j][3] for j in order])
    labs = np.array([splats[j][4] for j in order])
    srcs = np.array([splats[j][1] for j in order])
    zs = np.array([splats[j][0] for j in order])

    # keep_j = (prod_{i<=j}(1-a_i) >= T_STOP) reproduces the sequential
    # stop-before-accumulate rule because transmittance never increases.
    T_incl = np.cumprod(1.0 - A, axis=0)
    keep = T_incl >= T_STOP
    T_excl = np.concatenate([np.ones((1, H, W)), T_incl[:-1]], axis=0)
    w = A * T_excl * keep
    T_last = np.prod(np.where(keep, 1.0 - A, 1.0), axis=0)

    color = np.einsum("jhw,jc->hwc", w, cols) + T_last[..., None] * bg
    alpha = 1.0 - T_last
    bestw = w.max(axis=0)
    best = w.argmax(axis=0)
    hit = bestw > 0.0
    best_index = np.where(hit, srcs[best], -1)
    label = np.where(hit, labs[best], 0).astype(np.int32)

    num = np.einsum("jhw,j->hw", w, zs)
    depth = np.full((H, W), float(far))
    covered = alpha >= MIN_COVERAGE
    depth[covered] = num[covered] / alpha[covered]

    return {"color": color, "alpha": alpha, "label": label,
            "best_index": best_index, "best_weight": bestw, "depth": depth}


def brute_occlusion(label_map, depth_map, min_boundary=8, depth_tol=0.0):
    """Per-pixel reference for occlusion analysis: explicit edge scan, python
    sets, then mean-depth comparison per qualifying pair."""
    ids = label_map.ids
    D = depth_map.values.astype(np.float64)
    H, W = ids.shape
    edges = {}   # (lo, hi) -> [count, set(lo pix), set(hi pix)]
    for y in range(H):
        for x in range(W):
            a = int(ids[y, x])
            for dy, dx in ((0, 1), (1, 0)):
                yy, xx = y + dy, x + dx
                if yy >= H or xx >= W:
                    continue
                b = int(ids[yy, xx])
                if a == 0 or b == 0 or a == b:
                    continue
                lo, hi = min(a, b), max(a, b)
                rec = edges.setdefault((lo, hi), [0, set(), set()])
                rec[0] += 1
                pix_a, pix_b = (y, x), (yy, xx)
                if a == lo:
                    rec[1].add(pix_a)
                    rec[2].add(pix_b)
                else:
                    rec[1].add(pix_b)
                    rec[2].add(pix_a)
    present = sorted(int(v) for v in np.unique(ids) if v != 0)
    occluders = {k: [] for k in present}
    for (lo, hi), (count, lo_pix, hi_pix) in edges.items():
        if count < min_boundary:
            continue
        d_lo = np.mean([D[p] for p in sorted(lo_pix)])
        d_hi = np.mean([D[p] for p in sorted(hi_pix)])
        if d_hi < d_lo * (1.0 - depth_tol):
            occluders[lo].append(hi)
        if d_lo < d_hi * (1.0 - depth_tol):
            occluders[hi].append(lo)
    masks = {}
    for k in present:
        occluders[k].sort()
        m = np.ones((H, W), dtype=bool)
        for b in occluders[k]:
            m &= ids != b
        masks[k] = m
    return occluders, masks
