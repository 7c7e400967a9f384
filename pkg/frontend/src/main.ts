/** App wiring: clip panes, curve drawing, synthesis controls. */

import { ApiClient, ModelInfo, SynthRequest } from "./api.js";
import { CurveDraft, CurvePoint } from "./curve.js";
import { pointerToCanvas, tToX, valueToY, xToT, yToValue } from "./coords.js";
import { Player } from "./player.js";
import { renderSpectrogram } from "./spectrogram.js";
import { renderWaveform } from "./waveform.js";

const api = new ApiClient("");
const player = new Player();

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const errorBar = $("error-bar");
const queuePill = $("queue-pill");
const seedDisplay = $("seed-display");
const playButton = $<HTMLButtonElement>("play");

let models: ModelInfo[] = [];
let busy = false;
let serverQueue = 0;
let lastSeed: number | null = null;

function showError(message: string): void {
  errorBar.textContent = message;
  errorBar.hidden = message === "";
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

// --- curve panes -----------------------------------------------------------

interface Pane {
  draft: CurveDraft;
  loaded: CurvePoint[] | null; // last stored curve fetched from the server
  canvas: HTMLCanvasElement;
}

function repaint(pane: Pane): void {
  const ctx = pane.canvas.getContext("2d")!;
  const { width, height } = pane.canvas;
  ctx.clearRect(0, 0, width, height);
  if (pane.loaded) {
    ctx.strokeStyle = "rgba(255, 255, 255, 0.55)";
    ctx.lineWidth = 1.5;
    polyline(ctx, pane.loaded, width, height);
  }
  const points = pane.draft.points();
  if (points.length) {
    ctx.strokeStyle = "#ff9f43";
    ctx.lineWidth = 2;
    polyline(ctx, points, width, height);
  }
}

function polyline(
  ctx: CanvasRenderingContext2D,
  points: CurvePoint[],
  width: number,
  height: number,
): void {
  ctx.beginPath();
  points.forEach((p, i) => {
    const x = tToX(p.t, width);
    const y = valueToY(p.v, height);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function attachDrawing(pane: Pane): void {
  const canvas = pane.canvas;
  const toCurve = (ev: PointerEvent): { t: number; v: number } => {
    const rect = canvas.getBoundingClientRect();
    const { x, y } = pointerToCanvas(ev.clientX, ev.clientY, rect, canvas);
    return { t: xToT(x, canvas.width), v: yToValue(y, canvas.height) };
  };
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    const { t, v } = toCurve(ev);
    pane.draft.beginStroke(t, v);
    repaint(pane);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (ev.buttons === 0) return;
    const { t, v } = toCurve(ev);
    pane.draft.extendStroke(t, v);
    repaint(pane);
  });
  const finish = () => {
    pane.draft.endStroke();
    repaint(pane);
  };
  canvas.addEventListener("pointerup", finish);
  canvas.addEventListener("pointercancel", finish);
}

function wirePane(pane: Pane, nameInput: HTMLInputElement, prefix: string): void {
  attachDrawing(pane);
  $(`${prefix}-save`).addEventListener("click", async () => {
    const points = pane.draft.toSparse();
    if (points.length === 0) {
      showError("draw a curve before saving");
      return;
    }
    try {
      await api.saveCurve(nameInput.value.trim(), points);
      await loadPaneCurve(pane, nameInput.value.trim());
      showError("");
    } catch (err) {
      showError(`save failed: ${describe(err)}`);
    }
  });
  $(`${prefix}-load`).addEventListener("click", async () => {
    try {
      await loadPaneCurve(pane, nameInput.value.trim());
      showError("");
    } catch (err) {
      showError(`load failed: ${describe(err)}`);
    }
  });
  $(`${prefix}-clear`).addEventListener("click", () => {
    pane.draft.clear();
    pane.loaded = null;
    repaint(pane);
  });
}

async function loadPaneCurve(pane: Pane, name: string): Promise<void> {
  const stored = await api.curve(name);
  const n = stored.values.length;
  pane.loaded = stored.values.map((v, i) => ({
    t: n > 1 ? i / (n - 1) : 0,
    v,
  }));
  repaint(pane);
}

const labelPane: Pane = {
  draft: new CurveDraft(),
  loaded: null,
  canvas: $<HTMLCanvasElement>("label-overlay"),
};
const inferPane: Pane = {
  draft: new CurveDraft(),
  loaded: null,
  canvas: $<HTMLCanvasElement>("inference"),
};

// --- clip panes ------------------------------------------------------------

async function refreshClip(): Promise<void> {
  const empty = $("clip-empty");
  const panes = $("clip-panes");
  try {
    const clip = await api.clip();
    empty.hidden = true;
    panes.hidden = false;
    renderWaveform(clip.waveform, $<HTMLCanvasElement>("waveform"));
    renderSpectrogram(clip.spectrogram, $<HTMLCanvasElement>("spectrogram"));
    const seconds = clip.length / clip.sample_rate;
    $("clip-meta").textContent =
      `${seconds.toFixed(2)} s at ${clip.sample_rate} Hz`;
  } catch {
    empty.hidden = false;
    panes.hidden = true;
  }
}

// --- models and synthesis --------------------------------------------------

async function refreshModels(): Promise<void> {
  const select = $<HTMLSelectElement>("model-select");
  try {
    models = await api.models();
  } catch (err) {
    showError(`cannot list models: ${describe(err)}`);
    return;
  }
  select.innerHTML = "";
  for (const m of models) {
    const opt = document.createElement("option");
    opt.value = m.id;
    opt.textContent = `${m.id} (${m.controls.join(", ") || m.num_controls})`;
    select.appendChild(opt);
  }
}

function currentModel(): ModelInfo | undefined {
  const id = $<HTMLSelectElement>("model-select").value;
  return models.find((m) => m.id === id);
}

function numberOr<T>(raw: string, fallback: T): number | T {
  const value = Number(raw);
  return raw.trim() !== "" && Number.isFinite(value) ? value : fallback;
}

function buildRequest(): SynthRequest {
  const model = currentModel();
  if (!model) throw new Error("no model selected");
  const names = $<HTMLInputElement>("curve-names").value
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s !== "");
  const curves: SynthRequest["curves"] = [...names];
  if ($<HTMLInputElement>("use-drawn").checked && !inferPane.draft.isEmpty) {
    curves.unshift(inferPane.draft.toSparse());
  }
  if (curves.length !== model.num_controls) {
    throw new Error(
      `model needs ${model.num_controls} curve(s); supplied ${curves.length}`,
    );
  }
  const req: SynthRequest = {
    model: model.id,
    curves,
    length_frames: Math.max(1, Math.round(
      numberOr($<HTMLInputElement>("length-frames").value, 512) as number)),
  };
  const seed = numberOr($<HTMLInputElement>("seed-input").value, null);
  if (seed !== null) req.seed = seed;
  const k = numberOr($<HTMLInputElement>("topk-k").value, null);
  if (k !== null && k > 0) {
    req.topk = {
      k,
      lo: numberOr($<HTMLInputElement>("topk-lo").value, 0.5) as number,
      hi: numberOr($<HTMLInputElement>("topk-hi").value, 2.0) as number,
    };
  }
  const fInit = numberOr($<HTMLInputElement>("shift-init").value, 0) as number;
  const fShift = numberOr($<HTMLInputElement>("shift-step").value, 0) as number;
  if (fInit > 0 || fShift > 0) {
    req.shift_rand = { f_init: fInit, f_shift: fShift };
  }
  const frameLen = numberOr($<HTMLInputElement>("frame-len").value, null);
  if (frameLen !== null && frameLen > 0) req.frame_len = frameLen;
  if ($<HTMLInputElement>("stereo").checked) req.stereo = true;
  return req;
}

function updatePlayButton(): void {
  playButton.disabled = busy || serverQueue > 0;
  queuePill.textContent = busy
    ? "rendering…"
    : serverQueue > 0
      ? `queue ${serverQueue}`
      : "idle";
  queuePill.classList.toggle("busy", busy || serverQueue > 0);
}

playButton.addEventListener("click", async () => {
  if (busy) return; // one synthesis request in flight at a time
  let req: SynthRequest;
  try {
    req = buildRequest();
  } catch (err) {
    showError(describe(err));
    return;
  }
  busy = true;
  updatePlayButton();
  showError("");
  try {
    const result = await api.synth(req);
    lastSeed = result.seed;
    seedDisplay.textContent = `seed ${result.seed}`;
    player.play(result.wav);
  } catch (err) {
    showError(`synthesis failed: ${describe(err)}`);
  } finally {
    busy = false;
    updatePlayButton();
  }
});

$("reuse-seed").addEventListener("click", () => {
  if (lastSeed !== null) {
    $<HTMLInputElement>("seed-input").value = String(lastSeed);
  }
});

async function pollStatus(): Promise<void> {
  try {
    serverQueue = await api.status();
  } catch {
    /* transient; keep the last value */
  }
  updatePlayButton();
}

// --- boot ------------------------------------------------------------------

wirePane(labelPane, $<HTMLInputElement>("label-name"), "label");
wirePane(inferPane, $<HTMLInputElement>("inference-name"), "inference");
void refreshClip();
void refreshModels();
void pollStatus();
setInterval(() => void pollStatus(), 1000);
updatePlayButton();
