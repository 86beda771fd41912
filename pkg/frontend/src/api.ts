/** Typed client for the segmentation service HTTP interface.
 *
 * Every method issues exactly one request and reports it through the
 * log callback, so a UI built on this client can show a request log
 * where each user action corresponds to one documented endpoint call.
 */

export interface ViewInfo {
  id: string;
  width: number;
  height: number;
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  /** Row-major 3x3 world-to-camera rotation. */
  rotation: number[];
  /** World-to-camera translation. */
  translation: number[];
  split: string;
}

export interface HealthInfo {
  version: string;
  gaussians: number;
  views: number;
  labels: Record<string, number>;
  extractions: number;
}

export interface PickEntry {
  id: number;
  pixel_count: number;
}

export interface PickResult {
  /** Labels under the picked region, largest pixel count first. */
  labels: PickEntry[];
}

export interface ExtractResult {
  object_id: string;
  labels: number[];
  gaussians: number;
  /** World-space mean of the extracted Gaussians; orbit anchor. */
  centroid: number[];
}

export interface Pose {
  rotation: number[];
  translation: number[];
}

export interface LogEntry {
  action: string;
  method: string;
  path: string;
  status: number;
  ms: number;
}

export class ServiceError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private onLog: (entry: LogEntry) => void = () => {},
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request(
    action: string,
    method: string,
    path: string,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<Response> {
    const init: RequestInit = { method, signal: signal ?? null };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const t0 = Date.now();
    const resp = await this.fetchFn(this.baseUrl + path, init);
    this.onLog({ action, method, path, status: resp.status, ms: Date.now() - t0 });
    if (!resp.ok) {
      let code = "error";
      let message = `${resp.status} on ${path}`;
      try {
        const payload = (await resp.json()) as { code?: string; message?: string };
        if (payload.code) code = payload.code;
        if (payload.message) message = payload.message;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ServiceError(resp.status, code, message);
    }
    return resp;
  }

  private async json<T>(
    action: string,
    method: string,
    path: string,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const resp = await this.request(action, method, path, body, signal);
    return (await resp.json()) as T;
  }

  private async bytes(
    action: string,
    method: string,
    path: string,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<Uint8Array> {
    const resp = await this.request(action, method, path, body, signal);
    return new Uint8Array(await resp.arrayBuffer());
  }

  health(): Promise<HealthInfo> {
    return this.json("health", "GET", "/health");
  }

  views(): Promise<ViewInfo[]> {
    return this.json<{ views: ViewInfo[] }>("list views", "GET", "/views").then((r) => r.views);
  }

  /** Full render of a registered view; optional label subset. */
  render(view: string, labels?: number[], signal?: AbortSignal): Promise<Uint8Array> {
    let path = `/render?view=${encodeURIComponent(view)}`;
    if (labels !== undefined && labels.length > 0) {
      path += `&labels=${labels.join(",")}`;
    }
    return this.bytes(`render ${view}`, "GET", path, undefined, signal);
  }

  /** 16-bit label-map PNG for a registered view. */
  labelmap(view: string, signal?: AbortSignal): Promise<Uint8Array> {
    return this.bytes(`labelmap ${view}`, "GET", `/labelmap?view=${encodeURIComponent(view)}`, undefined, signal);
  }

  /** Pixels are [x, y] pairs in image coordinates. */
  pickPixels(view: string, pixels: [number, number][]): Promise<PickResult> {
    return this.json(`pick pixels @ ${view}`, "POST", "/pick", { view, pixels });
  }

  pickPolygon(view: string, polygon: [number, number][]): Promise<PickResult> {
    return this.json(`pick polygon @ ${view}`, "POST", "/pick", { view, polygon });
  }

  extract(labels: number[]): Promise<ExtractResult> {
    return this.json(`extract [${labels.join(",")}]`, "POST", "/extract", { labels });
  }

  /** Extracted-object render at a registered view's own pose. */
  renderExtracted(objectId: string, view: string, signal?: AbortSignal): Promise<Uint8Array> {
    const path = `/render_extracted?object_id=${encodeURIComponent(objectId)}&view=${encodeURIComponent(view)}`;
    return this.bytes(`render ${objectId} @ ${view}`, "GET", path, undefined, signal);
  }

  /** Extracted-object render at an arbitrary pose with a view's framing. */
  renderExtractedPose(objectId: string, pose: Pose, framing: ViewInfo, signal?: AbortSignal): Promise<Uint8Array> {
    return this.bytes(`render ${objectId} posed`, "POST", "/render_extracted", {
      object_id: objectId,
      rotation: pose.rotation,
      translation: pose.translation,
      width: framing.width,
      height: framing.height,
      fx: framing.fx,
      fy: framing.fy,
      cx: framing.cx,
      cy: framing.cy,
    }, signal);
  }
}
