/** Tinted overlay pixels derived from a decoded label map.
 *
 * The overlay is UI chrome layered above the verbatim render: each
 * selected label's pixels get that label's palette tint at a fixed
 * alpha, everything else stays fully transparent. The render below is
 * never modified.
 */

import { colorFor } from "./palette.js";
import type { LabelGrid } from "./png16.js";

export const OVERLAY_ALPHA = 110;

/**
 * RGBA buffer (length width*height*4) tinting the given labels.
 * Pass null to tint every non-background label in the grid.
 */
export function tintLabels(
  grid: LabelGrid,
  labels: number[] | null,
): Uint8ClampedArray<ArrayBuffer> {
  const wanted = labels === null ? null : new Set(labels);
  const out = new Uint8ClampedArray(grid.width * grid.height * 4);
  for (let i = 0; i < grid.ids.length; i++) {
    const id = grid.ids[i] ?? 0;
    if (id === 0) continue;
    if (wanted !== null && !wanted.has(id)) continue;
    const c = colorFor(id);
    if (c === null) continue;
    out[4 * i] = c.r;
    out[4 * i + 1] = c.g;
    out[4 * i + 2] = c.b;
    out[4 * i + 3] = OVERLAY_ALPHA;
  }
  return out;
}

/** Pixel counts per non-background label, largest first. */
export function labelHistogram(grid: LabelGrid): { id: number; pixel_count: number }[] {
  const counts = new Map<number, number>();
  for (const id of grid.ids) {
    if (id === 0) continue;
    counts.set(id, (counts.get(id) ?? 0) + 1);
  }
  return [...counts.entries()]
    .map(([id, pixel_count]) => ({ id, pixel_count }))
    .sort((a, b) => b.pixel_count - a.pixel_count || a.id - b.id);
}
