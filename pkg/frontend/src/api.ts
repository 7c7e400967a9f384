/** Typed client for the synthesis service HTTP API.
 *
 * Every server interaction in the app goes through this module; state
 * is only ever changed via the documented POST endpoints.
 */

import type { CurvePoint } from "./curve.js";

export interface Spectrogram {
  rows: number;
  cols: number;
  data: number[];
}

export interface ClipPayload {
  sample_rate: number;
  length: number;
  waveform: [number, number][];
  spectrogram: Spectrogram;
}

export interface ModelInfo {
  id: string;
  controls: string[];
  num_controls: number;
  window: number;
  sample_rate: number;
}

export interface CurvePayload {
  name: string;
  length: number;
  values: number[];
}

export interface TopkSpec {
  k: number;
  lo: number;
  hi: number;
}

export interface ShiftSpec {
  f_init: number;
  f_shift: number;
}

export interface SynthRequest {
  model: string;
  curves: (string | CurvePoint[])[];
  length_frames: number;
  seed?: number;
  topk?: TopkSpec;
  shift_rand?: ShiftSpec;
  frame_len?: number;
  stereo?: boolean;
}

export interface SynthResult {
  wav: ArrayBuffer;
  seed: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorOf(resp: Response): Promise<ApiError> {
  let message = `HTTP ${resp.status}`;
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    /* non-JSON error body: keep the status text */
  }
  return new ApiError(resp.status, message);
}

export class ApiClient {
  constructor(
    private base = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`);
    if (!resp.ok) throw await errorOf(resp);
    return (await resp.json()) as T;
  }

  clip(): Promise<ClipPayload> {
    return this.getJson<ClipPayload>("/api/clip");
  }

  async models(): Promise<ModelInfo[]> {
    const body = await this.getJson<{ models: ModelInfo[] }>("/api/models");
    return body.models;
  }

  curve(name: string): Promise<CurvePayload> {
    return this.getJson<CurvePayload>(
      `/api/curve?name=${encodeURIComponent(name)}`,
    );
  }

  async status(): Promise<number> {
    const body = await this.getJson<{ queue_depth: number }>("/api/status");
    return body.queue_depth;
  }

  async saveCurve(name: string, points: CurvePoint[]): Promise<void> {
    const resp = await this.fetchFn(`${this.base}/api/curve`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name, points }),
    });
    if (!resp.ok) throw await errorOf(resp);
  }

  async synth(req: SynthRequest): Promise<SynthResult> {
    const resp = await this.fetchFn(`${this.base}/api/synth`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) throw await errorOf(resp);
    const seed = Number(resp.headers.get("X-Render-Seed") ?? "-1");
    return { wav: await resp.arrayBuffer(), seed };
  }
}
