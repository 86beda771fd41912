import { describe, expect, it } from "vitest";

import { colorFor, cssColor, PALETTE } from "../src/palette.js";

describe("label tint palette", () => {
  it("has 20 distinct colors", () => {
    expect(PALETTE.length).toBe(20);
    const keys = new Set(PALETTE.map((c) => `${c.r},${c.g},${c.b}`));
    expect(keys.size).toBe(20);
  });

  it("keys colors by label ID starting at 1", () => {
    expect(colorFor(1)).toEqual(PALETTE[0]);
    expect(colorFor(7)).toEqual(PALETTE[6]);
    expect(colorFor(20)).toEqual(PALETTE[19]);
  });

  it("cycles after 20 labels", () => {
    expect(colorFor(21)).toEqual(PALETTE[0]);
    expect(colorFor(40)).toEqual(PALETTE[19]);
    expect(colorFor(41)).toEqual(PALETTE[0]);
  });

  it("gives the same label the same color every time", () => {
    for (const id of [1, 3, 19, 22, 105]) {
      expect(colorFor(id)).toEqual(colorFor(id));
    }
  });

  it("leaves the background and invalid ids untinted", () => {
    expect(colorFor(0)).toBeNull();
    expect(colorFor(-2)).toBeNull();
    expect(colorFor(1.5)).toBeNull();
    expect(cssColor(0)).toBe("transparent");
  });

  it("formats css colors", () => {
    expect(cssColor(1)).toBe("rgb(230, 25, 75)");
  });
});
