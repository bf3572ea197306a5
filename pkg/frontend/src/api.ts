/** Typed client for the labeling service. The base URL is the one piece
 * of configuration the page takes. */

import type {
  Label, LabelResult, ParamsResult, RoundStatus, SampleResult, SceneDetail,
  SceneRow, SceneStatus, TrainResult,
} from "./types.js";

/** Service-reported failure: carries the {code, message} body. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }
}

export interface TrainOptions {
  epochs?: number;
  learning_rate?: number;
  synth_batch?: number;
  refine_steps?: number;
  skip_pending?: boolean;
}

export class Client {
  readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;

  constructor(baseUrl: string, fetchFn: typeof fetch = fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let code = "http_error";
      let message = `${method} ${path} -> ${res.status}`;
      try {
        const doc = await res.json();
        if (typeof doc?.code === "string") code = doc.code;
        if (typeof doc?.message === "string") message = doc.message;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(res.status, code, message);
    }
    return res.json() as Promise<T>;
  }

  sampleBatch(round: number, count: number): Promise<SampleResult> {
    return this.request("POST", `/rounds/${round}/samples`, { count });
  }

  listScenes(status: SceneStatus): Promise<{ status: SceneStatus; scenes: SceneRow[] }> {
    return this.request("GET", `/scenes?status=${status}`);
  }

  getScene(id: string): Promise<SceneDetail> {
    return this.request("GET", `/scenes/${id}`);
  }

  submitLabel(id: string, label: Label): Promise<LabelResult> {
    return this.request("POST", `/scenes/${id}/label`, { label });
  }

  train(round: number, options: TrainOptions = {}): Promise<TrainResult> {
    return this.request("POST", `/rounds/${round}/train`, options);
  }

  params(): Promise<ParamsResult> {
    return this.request("GET", "/params");
  }

  currentRound(): Promise<RoundStatus> {
    return this.request("GET", "/rounds/current");
  }
}
