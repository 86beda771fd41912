/** UI-independent viewer state machine.
 *
 * The page in main.ts and the scripted client used by the integration
 * test drive this same class, so "the viewer only talks to the service
 * through documented endpoints" is testable without a browser. Every
 * public method issues exactly one endpoint call through the client;
 * displayed images are kept as the verbatim payload bytes.
 */

import {
  ExtractResult,
  LogEntry,
  PickEntry,
  Pose,
  ServiceClient,
  ViewInfo,
} from "./api.js";
import { LatestWins } from "./latest.js";
import { orbitPose, Vec3 } from "./orbit.js";
import { decodeLabelMap, LabelGrid } from "./png16.js";

export interface RenderUpdate {
  view: ViewInfo;
  png: Uint8Array;
}

export interface OverlayUpdate {
  view: ViewInfo;
  png: Uint8Array;
  grid: LabelGrid;
}

export interface OrbitUpdate {
  angle: number;
  png: Uint8Array;
}

export class ViewerSession {
  readonly client: ServiceClient;
  readonly log: LogEntry[] = [];
  views: ViewInfo[] = [];
  current: ViewInfo | null = null;
  /** Verbatim PNG payload of the displayed render. */
  renderPng: Uint8Array | null = null;
  overlay: OverlayUpdate | null = null;
  lastPick: PickEntry[] | null = null;
  extraction: ExtractResult | null = null;
  orbitAngle = 0;
  orbitPng: Uint8Array | null = null;

  private latest = new LatestWins();

  constructor(
    baseUrl: string,
    onLog: (entry: LogEntry) => void = () => {},
    fetchFn?: (input: string, init?: RequestInit) => Promise<Response>,
  ) {
    this.client = new ServiceClient(
      baseUrl,
      (entry) => {
        this.log.push(entry);
        onLog(entry);
      },
      fetchFn,
    );
  }

  /** One GET /views; call once at startup. */
  async init(): Promise<ViewInfo[]> {
    this.views = await this.client.views();
    return this.views;
  }

  view(id: string): ViewInfo {
    const info = this.views.find((v) => v.id === id);
    if (info === undefined) throw new Error(`view ${id} not in the listing`);
    return info;
  }

  /** One GET /render; latest-wins within the view panel. */
  async selectView(id: string): Promise<RenderUpdate | null> {
    const info = this.view(id);
    const png = await this.latest.run("view", (signal) => this.client.render(id, undefined, signal));
    if (png === null) return null;
    this.current = info;
    this.renderPng = png;
    this.overlay = null;
    this.lastPick = null;
    return { view: info, png };
  }

  /** One GET /labelmap for the displayed view. */
  async showOverlay(): Promise<OverlayUpdate | null> {
    const info = this.requireView();
    const result = await this.latest.run("overlay", async (signal) => {
      const png = await this.client.labelmap(info.id, signal);
      return { view: info, png, grid: await decodeLabelMap(png) };
    });
    if (result === null) return null;
    this.overlay = result;
    return result;
  }

  /** One POST /pick with a pixel list ([x, y] image coordinates). */
  async pickPixels(pixels: [number, number][]): Promise<PickEntry[]> {
    const info = this.requireView();
    const res = await this.client.pickPixels(info.id, pixels);
    this.lastPick = res.labels;
    return res.labels;
  }

  /** One POST /pick with a lasso polygon. */
  async pickPolygon(polygon: [number, number][]): Promise<PickEntry[]> {
    const info = this.requireView();
    const res = await this.client.pickPolygon(info.id, polygon);
    this.lastPick = res.labels;
    return res.labels;
  }

  /** One POST /extract; the session id and centroid anchor the orbit. */
  async extractLabels(labels: number[]): Promise<ExtractResult> {
    const res = await this.client.extract(labels);
    this.extraction = res;
    this.orbitAngle = 0;
    this.orbitPng = null;
    return res;
  }

  basePose(): Pose {
    const info = this.requireView();
    return { rotation: [...info.rotation], translation: [...info.translation] };
  }

  centroid(): Vec3 {
    const ex = this.requireExtraction();
    return [ex.centroid[0] ?? 0, ex.centroid[1] ?? 0, ex.centroid[2] ?? 0];
  }

  /**
   * One /render_extracted call; latest-wins within the orbit panel.
   * Angle 0 uses the view-addressed GET, so the slider's rest position
   * is byte-identical to the plain extracted render of the view.
   * Any other angle posts the orbited pose with the view's framing.
   */
  async renderOrbit(angle: number): Promise<OrbitUpdate | null> {
    const info = this.requireView();
    const ex = this.requireExtraction();
    const png = await this.latest.run("orbit", (signal) => {
      if (angle === 0) {
        return this.client.renderExtracted(ex.object_id, info.id, signal);
      }
      const pose = orbitPose(this.basePose(), this.centroid(), angle);
      return this.client.renderExtractedPose(ex.object_id, pose, info, signal);
    });
    if (png === null) return null;
    this.orbitAngle = angle;
    this.orbitPng = png;
    return { angle, png };
  }

  private requireView(): ViewInfo {
    if (this.current === null) throw new Error("select a view first");
    return this.current;
  }

  private requireExtraction(): ExtractResult {
    if (this.extraction === null) throw new Error("extract an object first");
    return this.extraction;
  }
}
