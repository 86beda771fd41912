/** Browser page wiring for the viewer.
 *
 * Layout: a view browser with thumbnails, the main stage showing the
 * selected render with a tint overlay and pick interactions, a pick
 * result list, an extraction panel with an orbit slider, and a request
 * log. All pixels shown in <img> elements are verbatim service
 * payloads behind blob URLs; the overlay is a separate canvas layered
 * on top, and scaling is CSS-only.
 */

import { LogEntry, PickEntry, ServiceError } from "./api.js";
import { ViewerSession } from "./controller.js";
import { cssColor } from "./palette.js";
import { tintLabels } from "./overlay.js";
import type { LabelGrid } from "./png16.js";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:7878";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function pngUrl(bytes: Uint8Array): string {
  // copy so the blob sees a plain ArrayBuffer, never a shared one
  return URL.createObjectURL(new Blob([new Uint8Array(bytes)], { type: "image/png" }));
}

/** Swap an image to a new blob URL, revoking the previous one. */
function setImage(img: HTMLImageElement, bytes: Uint8Array): void {
  const old = img.src;
  img.src = pngUrl(bytes);
  if (old.startsWith("blob:")) URL.revokeObjectURL(old);
}

const logBody = () => byId<HTMLTableSectionElement>("log-body");

function addLogRow(entry: LogEntry): void {
  const row = el("tr", entry.status < 400 ? "ok" : "err");
  row.append(
    el("td", "mono", entry.action),
    el("td", "mono", `${entry.method} ${entry.path}`),
    el("td", "mono", String(entry.status)),
    el("td", "mono", `${entry.ms} ms`),
  );
  logBody().prepend(row);
}

const session = new ViewerSession(SERVICE_URL, addLogRow);

const status = () => byId<HTMLDivElement>("status");

function showError(err: unknown): void {
  if (err instanceof ServiceError) {
    status().textContent = `service error ${err.status} (${err.code}): ${err.message}`;
  } else {
    status().textContent = String(err);
  }
  status().classList.add("error");
}

function showStatus(text: string): void {
  status().textContent = text;
  status().classList.remove("error");
}

// ---------------------------------------------------------------- stage

interface Lasso {
  points: [number, number][];
}

const lasso: Lasso = { points: [] };
let overlayGrid: LabelGrid | null = null;
let overlayLabels: number[] | null = null;

function stageImg(): HTMLImageElement {
  return byId<HTMLImageElement>("stage-img");
}

function overlayCanvas(): HTMLCanvasElement {
  return byId<HTMLCanvasElement>("stage-overlay");
}

function redrawOverlay(): void {
  const canvas = overlayCanvas();
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (overlayGrid !== null) {
    const rgba = tintLabels(overlayGrid, overlayLabels);
    ctx.putImageData(new ImageData(rgba, overlayGrid.width, overlayGrid.height), 0, 0);
  }
  if (lasso.points.length > 0) {
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1;
    ctx.beginPath();
    const first = lasso.points[0];
    if (first === undefined) return;
    ctx.moveTo(first[0] + 0.5, first[1] + 0.5);
    for (const [x, y] of lasso.points.slice(1)) ctx.lineTo(x + 0.5, y + 0.5);
    ctx.stroke();
  }
}

/** Map a mouse event to image pixel coordinates (CSS scaling only). */
function eventPixel(ev: MouseEvent): [number, number] {
  const img = stageImg();
  const rect = img.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * img.naturalWidth;
  const y = ((ev.clientY - rect.top) / rect.height) * img.naturalHeight;
  return [Math.max(0, Math.min(img.naturalWidth - 1, Math.floor(x))),
          Math.max(0, Math.min(img.naturalHeight - 1, Math.floor(y)))];
}

function renderPickList(entries: PickEntry[]): void {
  const list = byId<HTMLUListElement>("pick-list");
  list.replaceChildren();
  for (const entry of entries) {
    const item = el("li");
    const check = el("input") as HTMLInputElement;
    check.type = "checkbox";
    check.checked = true;
    check.dataset["label"] = String(entry.id);
    const swatch = el("span", "swatch");
    swatch.style.backgroundColor = cssColor(entry.id);
    item.append(check, swatch, el("span", "mono", `label ${entry.id}`),
                el("span", "count", `${entry.pixel_count} px`));
    list.append(item);
  }
  byId<HTMLButtonElement>("extract-btn").disabled = entries.length === 0;
}

function checkedLabels(): number[] {
  const boxes = byId<HTMLUListElement>("pick-list").querySelectorAll("input:checked");
  return [...boxes].map((b) => Number((b as HTMLInputElement).dataset["label"]));
}

async function applyPick(entries: PickEntry[]): Promise<void> {
  renderPickList(entries);
  // narrow the tint to the picked labels when the overlay is loaded
  if (overlayGrid !== null) {
    overlayLabels = entries.map((e) => e.id);
    redrawOverlay();
  }
  showStatus(entries.length === 0 ? "nothing picked" :
    `picked ${entries.map((e) => `label ${e.id} (${e.pixel_count} px)`).join(", ")}`);
}

async function selectView(id: string): Promise<void> {
  try {
    const update = await session.selectView(id);
    if (update === null) return; // superseded by a later selection
    const img = stageImg();
    setImage(img, update.png);
    await img.decode();
    const canvas = overlayCanvas();
    canvas.width = update.view.width;
    canvas.height = update.view.height;
    overlayGrid = null;
    overlayLabels = null;
    lasso.points = [];
    redrawOverlay();
    renderPickList([]);
    byId<HTMLDivElement>("stage-title").textContent =
      `${update.view.id} (${update.view.split}, ${update.view.width}x${update.view.height})`;
    for (const btn of document.querySelectorAll(".thumb")) {
      btn.classList.toggle("selected", (btn as HTMLElement).dataset["view"] === id);
    }
    showStatus(`showing ${id}`);
  } catch (err) {
    showError(err);
  }
}

async function toggleOverlay(): Promise<void> {
  try {
    if (overlayGrid !== null) {
      overlayGrid = null;
      overlayLabels = null;
      redrawOverlay();
      showStatus("overlay hidden");
      return;
    }
    const update = await session.showOverlay();
    if (update === null) return;
    overlayGrid = update.grid;
    overlayLabels = session.lastPick === null ? null : session.lastPick.map((e) => e.id);
    redrawOverlay();
    showStatus(`overlay for ${update.view.id}`);
  } catch (err) {
    showError(err);
  }
}

function stageClick(ev: MouseEvent): void {
  if (session.current === null) return;
  const px = eventPixel(ev);
  if (byId<HTMLInputElement>("lasso-mode").checked) {
    lasso.points.push(px);
    redrawOverlay();
    showStatus(`lasso: ${lasso.points.length} points (double-click to close)`);
    return;
  }
  session.pickPixels([px]).then(applyPick).catch(showError);
}

function stageDoubleClick(): void {
  if (lasso.points.length >= 3) {
    const polygon = lasso.points.slice();
    lasso.points = [];
    redrawOverlay();
    session.pickPolygon(polygon).then(applyPick).catch(showError);
  } else {
    lasso.points = [];
    redrawOverlay();
  }
}

// ----------------------------------------------------------- extraction

function orbitSlider(): HTMLInputElement {
  return byId<HTMLInputElement>("orbit-angle");
}

async function runExtract(): Promise<void> {
  const labels = checkedLabels();
  if (labels.length === 0) return;
  try {
    const res = await session.extractLabels(labels);
    byId<HTMLDivElement>("extract-info").textContent =
      `${res.object_id}: ${res.gaussians} Gaussians, labels [${res.labels.join(", ")}], ` +
      `centroid (${res.centroid.map((c) => c.toFixed(3)).join(", ")})`;
    orbitSlider().value = "0";
    orbitSlider().disabled = false;
    await orbitTo(0);
  } catch (err) {
    showError(err);
  }
}

async function orbitTo(angle: number): Promise<void> {
  try {
    const update = await session.renderOrbit(angle);
    if (update === null) return; // superseded while dragging
    setImage(byId<HTMLImageElement>("orbit-img"), update.png);
    byId<HTMLSpanElement>("orbit-readout").textContent =
      `${(angle * (180 / Math.PI)).toFixed(0)}°`;
  } catch (err) {
    showError(err);
  }
}

// -------------------------------------------------------------- startup

async function loadThumbnails(): Promise<void> {
  const strip = byId<HTMLDivElement>("thumbs");
  for (const info of session.views) {
    const btn = el("button", "thumb");
    btn.dataset["view"] = info.id;
    const img = el("img");
    img.alt = info.id;
    btn.append(img, el("div", "thumb-label", `${info.id} (${info.split})`));
    btn.addEventListener("click", () => void selectView(info.id));
    strip.append(btn);
  }
  // sequential so the single-threaded renderer is not flooded
  for (const info of session.views) {
    try {
      const png = await session.client.render(info.id);
      const img = strip.querySelector<HTMLImageElement>(
        `.thumb[data-view="${info.id}"] img`);
      if (img !== null) setImage(img, png);
    } catch (err) {
      showError(err);
    }
  }
}

async function boot(): Promise<void> {
  try {
    showStatus(`connecting to ${SERVICE_URL}`);
    const health = await session.client.health();
    const views = await session.init();
    showStatus(`${health.gaussians} Gaussians, ${views.length} views, ` +
               `labels ${Object.keys(health.labels).join(", ")}`);
    byId<HTMLButtonElement>("overlay-btn").addEventListener("click", () => void toggleOverlay());
    byId<HTMLButtonElement>("extract-btn").addEventListener("click", () => void runExtract());
    stageImg().addEventListener("click", stageClick);
    stageImg().addEventListener("dblclick", stageDoubleClick);
    overlayCanvas().addEventListener("click", stageClick);
    overlayCanvas().addEventListener("dblclick", stageDoubleClick);
    orbitSlider().addEventListener("input", () => {
      void orbitTo(Number(orbitSlider().value));
    });
    await loadThumbnails();
    const first = views[0];
    if (first !== undefined) await selectView(first.id);
  } catch (err) {
    showError(err);
  }
}

void boot();
