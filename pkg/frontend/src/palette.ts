/** Fixed 20-color tint palette, keyed by label ID.
 *
 * Label k always maps to the same color in every view and panel, so a
 * region keeps its tint as the user moves between views. ID 0 is the
 * background and has no tint.
 */

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

export const PALETTE: readonly Rgb[] = [
  { r: 230, g: 25, b: 75 },
  { r: 60, g: 180, b: 75 },
  { r: 255, g: 225, b: 25 },
  { r: 0, g: 130, b: 200 },
  { r: 245, g: 130, b: 48 },
  { r: 145, g: 30, b: 180 },
  { r: 70, g: 240, b: 240 },
  { r: 240, g: 50, b: 230 },
  { r: 210, g: 245, b: 60 },
  { r: 250, g: 190, b: 212 },
  { r: 0, g: 128, b: 128 },
  { r: 220, g: 190, b: 255 },
  { r: 170, g: 110, b: 40 },
  { r: 255, g: 250, b: 200 },
  { r: 128, g: 0, b: 0 },
  { r: 170, g: 255, b: 195 },
  { r: 128, g: 128, b: 0 },
  { r: 255, g: 215, b: 180 },
  { r: 0, g: 0, b: 128 },
  { r: 128, g: 128, b: 128 },
];

/** Tint for a label ID; null for the background (id 0) and negatives. */
export function colorFor(label: number): Rgb | null {
  if (!Number.isInteger(label) || label <= 0) return null;
  const entry = PALETTE[(label - 1) % PALETTE.length];
  return entry === undefined ? null : entry;
}

export function cssColor(label: number): string {
  const c = colorFor(label);
  return c === null ? "transparent" : `rgb(${c.r}, ${c.g}, ${c.b})`;
}
