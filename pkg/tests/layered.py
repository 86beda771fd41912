"""Randomized layered test scenes with ground truth known by construction.

Rectangles are painted back to front at distinct constant depths (with
negligible jitter), so for any label pair sharing enough visible boundary the
occluder is simply the one painted at the smaller depth; no mean-depth
machinery is involved in building the expected answer.
"""

import numpy as np

from labelsplat import DepthMap, LabelMap

BACKGROUND_DEPTH = 50.0


def _count_edges(ids):
    counts = {}
    H, W = ids.shape
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
                key = (min(a, b), max(a, b))
                counts[key] = counts.get(key, 0) + 1
    return counts


def layered_scene(rng, size=48, n_objects=None, min_boundary=8):
    """Returns (label_map, depth_map, gt_occluders, gt_unocclusion)."""
    H = W = size
    n = int(n_objects if n_objects is not None else rng.integers(2, 6))
    depths = np.sort(rng.choice(np.arange(2, 40), size=n, replace=False) * 0.5)
    order = rng.permutation(n)  # label (i+1) gets depth depths[order[i]]
    label_depth = {i + 1: float(depths[order[i]]) for i in range(n)}

    ids = np.zeros((H, W), dtype=np.int32)
    depth_img = np.full((H, W), BACKGROUND_DEPTH, dtype=np.float64)
    for label, d in sorted(label_depth.items(), key=lambda kv: -kv[1]):
        w = int(rng.integers(10, 29))
        h = int(rng.integers(10, 29))
        x0 = int(rng.integers(0, W - w))
        y0 = int(rng.integers(0, H - h))
        ids[y0:y0 + h, x0:x0 + w] = label
        depth_img[y0:y0 + h, x0:x0 + w] = d + rng.uniform(-0.01, 0.01, (h, w))

    present = sorted(int(v) for v in np.unique(ids) if v != 0)
    gt_occluders = {k: [] for k in present}
    for (a, b), count in _count_edges(ids).items():
        if count < min_boundary:
            continue
        if label_depth[a] < label_depth[b]:
            gt_occluders[b].append(a)
        else:
            gt_occluders[a].append(b)
    gt_masks = {}
    for k in present:
        gt_occluders[k].sort()
        m = np.ones((H, W), dtype=bool)
        for b in gt_occluders[k]:
            m &= ids != b
        gt_masks[k] = m
    return (LabelMap(ids=ids), DepthMap(values=depth_img.astype(np.float32)),
            gt_occluders, gt_masks)
