import { describe, expect, it } from "vitest";

import { ViewerSession } from "../src/controller.js";
import { encodePng, grid } from "./helpers/png.js";

const RENDER_BYTES = new Uint8Array([137, 80, 78, 71, 1, 2, 3]);
const EXTRACTED_BYTES = new Uint8Array([137, 80, 78, 71, 9]);
const POSED_BYTES = new Uint8Array([137, 80, 78, 71, 5, 5]);
const LABELMAP_BYTES = encodePng(grid(4, 3, (x) => (x < 2 ? 1 : 2)));

const VIEWS = [
  {
    id: "train00", width: 4, height: 3, fx: 70, fy: 70, cx: 2, cy: 1.5,
    rotation: [1, 0, 0, 0, 1, 0, 0, 0, 1], translation: [0, 0, 4], split: "train",
  },
  {
    id: "test00", width: 4, height: 3, fx: 70, fy: 70, cx: 2, cy: 1.5,
    rotation: [1, 0, 0, 0, 1, 0, 0, 0, 1], translation: [0, 0, 5], split: "test",
  },
];

interface Call {
  method: string;
  url: string;
  body: unknown;
}

/** In-memory stand-in for the service, speaking the documented wire shapes. */
function fakeService(): { calls: Call[]; fetchFn: typeof fetch } {
  const calls: Call[] = [];
  const fetchFn = (async (input: string | URL | Request, init?: RequestInit) => {
    const url = String(input);
    const path = url.replace(/^http:\/\/[^/]+/, "");
    calls.push({
      method: init?.method ?? "GET",
      url: path,
      body: typeof init?.body === "string" ? JSON.parse(init.body) : undefined,
    });
    const json = (payload: unknown) =>
      new Response(JSON.stringify(payload), {
        status: 200,
        headers: { "content-type": "application/json" },
      });
    if (path === "/views") return json({ views: VIEWS });
    if (path.startsWith("/render?")) return new Response(new Uint8Array(RENDER_BYTES));
    if (path.startsWith("/labelmap?")) return new Response(new Uint8Array(LABELMAP_BYTES));
    if (path === "/pick") {
      return json({ labels: [{ id: 2, pixel_count: 6 }, { id: 1, pixel_count: 4 }] });
    }
    if (path === "/extract") {
      return json({ object_id: "obj-2", labels: [2], gaussians: 11, centroid: [0.5, 0, 3] });
    }
    if (path.startsWith("/render_extracted?")) {
      return new Response(new Uint8Array(EXTRACTED_BYTES));
    }
    if (path === "/render_extracted") return new Response(new Uint8Array(POSED_BYTES));
    return new Response(JSON.stringify({ code: "unknown", message: path }), { status: 404 });
  }) as typeof fetch;
  return { calls, fetchFn };
}

function session(): { s: ViewerSession; calls: Call[] } {
  const { calls, fetchFn } = fakeService();
  const s = new ViewerSession("http://svc:1", () => {}, fetchFn);
  return { s, calls };
}

describe("viewer session", () => {
  it("walks pick, extract, orbit with exactly one call per action", async () => {
    const { s, calls } = session();
    await s.init();
    await s.selectView("train00");
    await s.showOverlay();
    await s.pickPixels([[1, 1]]);
    await s.extractLabels([2]);
    await s.renderOrbit(0);
    await s.renderOrbit(0.5);
    expect(calls.map((c) => `${c.method} ${c.url.split("?")[0]}`)).toEqual([
      "GET /views",
      "GET /render",
      "GET /labelmap",
      "POST /pick",
      "POST /extract",
      "GET /render_extracted",
      "POST /render_extracted",
    ]);
    expect(s.log).toHaveLength(calls.length);
  });

  it("stores the verbatim render payload", async () => {
    const { s } = session();
    await s.init();
    await s.selectView("train00");
    expect([...(s.renderPng ?? [])]).toEqual([...RENDER_BYTES]);
  });

  it("decodes the overlay label grid", async () => {
    const { s } = session();
    await s.init();
    await s.selectView("train00");
    const overlay = await s.showOverlay();
    expect(overlay?.grid.width).toBe(4);
    expect([...(overlay?.grid.ids ?? [])]).toEqual([1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2]);
    expect([...(overlay?.png ?? [])]).toEqual([...LABELMAP_BYTES]);
  });

  it("keeps pick results ordered as the service returned them", async () => {
    const { s } = session();
    await s.init();
    await s.selectView("train00");
    const entries = await s.pickPolygon([[0, 0], [3, 0], [3, 2]]);
    expect(entries.map((e) => e.id)).toEqual([2, 1]);
    expect(s.lastPick).toEqual(entries);
  });

  it("addresses the rest position by view and other angles by pose", async () => {
    const { s, calls } = session();
    await s.init();
    await s.selectView("test00");
    await s.extractLabels([2]);
    const at0 = await s.renderOrbit(0);
    expect([...(at0?.png ?? [])]).toEqual([...EXTRACTED_BYTES]);
    const rest = calls[calls.length - 1];
    expect(rest?.method).toBe("GET");
    expect(rest?.url).toBe("/render_extracted?object_id=obj-2&view=test00");

    const turned = await s.renderOrbit(0.7);
    expect([...(turned?.png ?? [])]).toEqual([...POSED_BYTES]);
    const posed = calls[calls.length - 1];
    expect(posed?.method).toBe("POST");
    const body = posed?.body as { rotation: number[]; width: number; fx: number };
    expect(body.rotation).toHaveLength(9);
    expect(body.width).toBe(4);
    expect(body.fx).toBe(70);
    // the orbited pose differs from the base pose
    expect(body.rotation).not.toEqual(VIEWS[1]?.rotation);
  });

  it("resets pick and overlay state when the view changes", async () => {
    const { s } = session();
    await s.init();
    await s.selectView("train00");
    await s.showOverlay();
    await s.pickPixels([[0, 0]]);
    await s.selectView("test00");
    expect(s.overlay).toBeNull();
    expect(s.lastPick).toBeNull();
  });

  it("refuses to orbit before an extraction exists", async () => {
    const { s } = session();
    await s.init();
    await s.selectView("train00");
    await expect(s.renderOrbit(0.3)).rejects.toThrow(/extract/);
  });
});
