"""Numba inner loops for the tile rasterizer (forward, backward, tile binning).

All kernels are written so results are identical at any thread count: the
forward writes disjoint per-tile pixel blocks, and the backward accumulates
into per-entry gradient rows (each owned by exactly one tile), which the
caller reduces in a fixed order.

Blend constants follow the vanilla splatting convention and are shared with
the naive test oracle: alpha is clamped to ALPHA_MAX, contributions below
ALPHA_MIN are skipped, the support is truncated where the squared Mahalanobis
distance exceeds SUPPORT_M2 (so 3-sigma tile rects are exact, not just
conservative), and blending stops once transmittance would drop below T_STOP,
checked before accumulating.
"""

import numpy as np
from numba import njit, prange

TILE = 16
LOW_PASS = 0.3
NEAR_Z = 0.01
ALPHA_MAX = 0.99
ALPHA_MIN = 1.0 / 255.0
T_STOP = 1e-4
SUPPORT_M2 = 9.0
MIN_COVERAGE = 1e-3


@njit(cache=True)
def count_tile_entries(tx0, tx1, ty0, ty1, n_tiles_x, counts):
    for s in range(tx0.shape[0]):
        for ty in range(ty0[s], ty1[s]):
            base = ty * n_tiles_x
            for tx in range(tx0[s], tx1[s]):
                counts[base + tx] += 1


@njit(cache=True)
def fill_tile_entries(tx0, tx1, ty0, ty1, n_tiles_x, cursors, entries):
    # Splats arrive depth-sorted, so each tile's entry list stays depth-sorted.
    for s in range(tx0.shape[0]):
        for ty in range(ty0[s], ty1[s]):
            base = ty * n_tiles_x
            for tx in range(tx0[s], tx1[s]):
                entries[cursors[base + tx]] = s
                cursors[base + tx] += 1


@njit(cache=True, parallel=True)
def forward_tiles(H, W, tile, n_tiles_x, n_tiles_y, offsets, entries,
                  centers, conics, opacities, colors, depths, bg,
                  out_color, out_T, out_last, out_best, out_bestw, out_dnum):
    """Front-to-back alpha blend per pixel, one thread per tile.

    out_last[py, px] is one past the entry index of the last accumulated
    splat, so the backward pass can walk exactly the accumulated prefix.
    out_best/out_bestw track the max-weight contributor (first wins ties).
    out_dnum accumulates depth * weight for expected-depth rendering.
    """
    for t in prange(n_tiles_x * n_tiles_y):
        ty = t // n_tiles_x
        tx = t - ty * n_tiles_x
        y_end = min((ty + 1) * tile, H)
        x_end = min((tx + 1) * tile, W)
        lo = offsets[t]
        hi = offsets[t + 1]
        for py in range(ty * tile, y_end):
            for px in range(tx * tile, x_end):
                T = 1.0
                cr = 0.0
                cg = 0.0
                cb = 0.0
                dnum = 0.0
                best = -1
                bestw = 0.0
                last = lo
                for e in range(lo, hi):
                    s = entries[e]
                    dx = px - centers[s, 0]
                    dy = py - centers[s, 1]
                    m2 = (conics[s, 0] * dx * dx + 2.0 * conics[s, 1] * dx * dy
                          + conics[s, 2] * dy * dy)
                    if m2 > SUPPORT_M2:
                        continue
                    alpha = opacities[s] * np.exp(-0.5 * m2)
                    if alpha > ALPHA_MAX:
                        alpha = ALPHA_MAX
                    if alpha < ALPHA_MIN:
                        continue
                    test_T = T * (1.0 - alpha)
                    if test_T < T_STOP:
                        break
                    w = alpha * T
                    cr += colors[s, 0] * w
                    cg += colors[s, 1] * w
                    cb += colors[s, 2] * w
                    dnum += depths[s] * w
                    if w > bestw:
                        bestw = w
                        best = s
                    T = test_T
                    last = e + 1
                out_color[py, px, 0] = cr + T * bg[0]
                out_color[py, px, 1] = cg + T * bg[1]
                out_color[py, px, 2] = cb + T * bg[2]
                out_T[py, px] = T
                out_last[py, px] = last
                out_best[py, px] = best
                out_bestw[py, px] = bestw
                out_dnum[py, px] = dnum


@njit(cache=True, parallel=True)
def backward_tiles(H, W, tile, n_tiles_x, n_tiles_y, offsets, entries,
                   centers, conics, opacities, colors, bg,
                   out_T, out_last, d_color,
                   g_color, g_opac, g_conic, g_center):
    """Back-to-front gradient walk mirroring forward_tiles.

    Gradients land in per-entry rows (g_* indexed by entry position), never
    shared between tiles; the caller reduces them to per-splat gradients in a
    deterministic order. Splats with alpha clamped at ALPHA_MAX get color
    gradients only (the clamp zeroes d alpha / d params).
    """
    for t in prange(n_tiles_x * n_tiles_y):
        ty = t // n_tiles_x
        tx = t - ty * n_tiles_x
        y_end = min((ty + 1) * tile, H)
        x_end = min((tx + 1) * tile, W)
        lo = offsets[t]
        for py in range(ty * tile, y_end):
            for px in range(tx * tile, x_end):
                dLr = d_color[py, px, 0]
                dLg = d_color[py, px, 1]
                dLb = d_color[py, px, 2]
                if dLr == 0.0 and dLg == 0.0 and dLb == 0.0:
                    continue
                T_final = out_T[py, px]
                bg_dot = bg[0] * dLr + bg[1] * dLg + bg[2] * dLb
                T = T_final
                ar = 0.0
                ag = 0.0
                ab = 0.0
                for e in range(out_last[py, px] - 1, lo - 1, -1):
                    s = entries[e]
                    dx = px - centers[s, 0]
                    dy = py - centers[s, 1]
                    m2 = (conics[s, 0] * dx * dx + 2.0 * conics[s, 1] * dx * dy
                          + conics[s, 2] * dy * dy)
                    if m2 > SUPPORT_M2:
                        continue
                    gau = np.exp(-0.5 * m2)
                    alpha = opacities[s] * gau
                    clamped = alpha > ALPHA_MAX
                    if clamped:
                        alpha = ALPHA_MAX
                    if alpha < ALPHA_MIN:
                        continue
                    T = T / (1.0 - alpha)  # transmittance in front of this splat
                    w = alpha * T
                    g_color[e, 0] += w * dLr
                    g_color[e, 1] += w * dLg
                    g_color[e, 2] += w * dLb
                    # d blend / d alpha: own color minus what this splat hides,
                    # minus the background shining through.
                    dL_da = ((colors[s, 0] - ar) * dLr + (colors[s, 1] - ag) * dLg
                             + (colors[s, 2] - ab) * dLb) * T
                    dL_da -= bg_dot * T_final / (1.0 - alpha)
                    ar = alpha * colors[s, 0] + (1.0 - alpha) * ar
                    ag = alpha * colors[s, 1] + (1.0 - alpha) * ag
                    ab = alpha * colors[s, 2] + (1.0 - alpha) * ab
                    if not clamped:
                        g_opac[e] += gau * dL_da
                        dL_dm2 = -0.5 * alpha * dL_da  # alpha = o * gau, d gau/d m2 = -gau/2
                        g_conic[e, 0] += dL_dm2 * dx * dx
                        g_conic[e, 1] += dL_dm2 * 2.0 * dx * dy
                        g_conic[e, 2] += dL_dm2 * dy * dy
                        g_center[e, 0] += -2.0 * dL_dm2 * (conics[s, 0] * dx + conics[s, 1] * dy)
                        g_center[e, 1] += -2.0 * dL_dm2 * (conics[s, 1] * dx + conics[s, 2] * dy)
