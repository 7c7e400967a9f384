"""Dataset preparation, the optimisation loop, and checkpoints.

Training follows the reconstruction recipe: concatenate all clips into one
buffer (tiling it up to at least one chunk), draw random chunks with their
aligned control slices, roll every noise band by one fresh shared shift
per step, render, and descend the multi-resolution STFT loss with Adam.
Gradients come from the hand-written adjoints in model/synthesis/loss.

Checkpoint file (.nbck): magic "NBCK", u32 version, u32 header length,
JSON header (model config, per-control normalisation, window, sample
rate, bank provenance, backend), payload = float32 flat parameters in
the canonical packing order.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .bank import NoiseBandBank
from .errors import GradientError, ModelError, TrainingError
from .features import (ControlCurve, RATE_AUDIO, extract_centroid, extract_loudness,
                       load_curve, normalize_feature, resample_curve)
from .loss import mrstft, mrstft_and_grad, usable_resolutions, DEFAULT_RESOLUTIONS
from .model import (ModelConfig, ModelParams, backward, forward, pack_params,
                    param_names, param_shapes, unpack_params)
from . import synthesis

CHECKPOINT_MAGIC = b"NBCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    chunk_len: int = 65536
    batch: int = 16
    lr: float = 0.001
    epochs: int = 10000
    seed: int = 0
    window: int = 32
    checkpoint_every: int = 0  # steps; 0 = only at the end

    def __post_init__(self):
        if self.chunk_len % self.window:
            raise TrainingError(
                f"chunk_len {self.chunk_len} not divisible by window {self.window}")
        if self.batch < 1 or self.chunk_len < self.window:
            raise TrainingError("batch >= 1 and chunk_len >= window required")
        if self.lr < 0.0:
            raise TrainingError(f"lr must be nonnegative, got {self.lr}")


@dataclass
class Dataset:
    audio: np.ndarray = field(repr=False)          # (N,) float64
    controls: list[ControlCurve] = field(repr=False)  # audio-rate, [0,1]
    control_matrix: np.ndarray = field(repr=False)    # (N, C)
    sample_rate: float

    @property
    def num_controls(self) -> int:
        return self.control_matrix.shape[1]


def prepare_dataset(clips: list[np.ndarray], sample_rate: float,
                    control_spec: list[str], chunk_len: int = 65536) -> Dataset:
    """Concatenate, tile to at least one chunk, extract + normalise controls.

    control_spec entries: "loudness", "centroid", or "curve:<path>" to use
    a stored curve instead of an extracted feature.
    """
    if not clips:
        raise TrainingError("no training clips given")
    audio = np.concatenate([np.asarray(c, dtype=np.float64).reshape(-1) for c in clips])
    if audio.size == 0:
        raise TrainingError("training clips are empty")
    if audio.size < chunk_len:
        reps = -(-chunk_len // audio.size)
        audio = np.tile(audio, reps)

    curves: list[ControlCurve] = []
    for spec_item in control_spec:
        if spec_item == "loudness":
            frames = extract_loudness(audio, sample_rate)
            curve = normalize_feature("loudness", resample_curve(frames, audio.size))
        elif spec_item == "centroid":
            frames = extract_centroid(audio, sample_rate)
            curve = normalize_feature("centroid", resample_curve(frames, audio.size))
        elif spec_item.startswith("curve:"):
            loaded = load_curve(spec_item[len("curve:"):])
            values = resample_curve(loaded.values, audio.size)
            curve = ControlCurve(name=loaded.name, values=np.clip(values, 0.0, 1.0),
                                 rate=RATE_AUDIO, norm_min=loaded.norm_min,
                                 norm_max=loaded.norm_max)
        else:
            raise TrainingError(f"unknown control spec {spec_item!r}")
        curves.append(curve)
    if not curves:
        raise TrainingError("need at least one control")
    matrix = np.stack([c.values for c in curves], axis=1)
    return Dataset(audio=audio, controls=curves, control_matrix=matrix,
                   sample_rate=sample_rate)


def steps_per_epoch(dataset: Dataset, config: TrainConfig) -> int:
    """One epoch = enough random chunks to cover the dataset once."""
    return max(1, -(-dataset.audio.size // config.chunk_len))


def sample_batch(dataset: Dataset, config: TrainConfig, rng: np.random.Generator):
    """Random chunks plus their control slices decimated to the internal rate."""
    n = dataset.audio.size
    if n < config.chunk_len:
        raise TrainingError(f"dataset shorter than one chunk ({n} < {config.chunk_len})")
    t_internal = config.chunk_len // config.window
    offsets = rng.integers(0, n - config.chunk_len + 1, size=config.batch)
    audio = np.empty((config.batch, config.chunk_len))
    controls = np.empty((config.batch, t_internal, dataset.num_controls))
    for b, off in enumerate(offsets):
        audio[b] = dataset.audio[off: off + config.chunk_len]
        window_slice = dataset.control_matrix[off: off + config.chunk_len]
        for c in range(dataset.num_controls):
            controls[b, :, c] = resample_curve(window_slice[:, c], t_internal)
    return audio, controls


class BandRenderer:
    """Per-step rolled noise-band mixing for the training loop."""

    backend = "bands"

    def __init__(self, bank: NoiseBandBank, window: int = 32,
                 num_threads: int = 0, impl: str | None = None):
        self.bank = bank
        self.window = window
        self.num_threads = num_threads
        self.impl = impl
        self.shift = 0

    def begin_step(self, rng: np.random.Generator) -> None:
        self.shift = int(rng.integers(0, self.bank.padded_len, endpoint=True))

    def render(self, amps: np.ndarray):
        audio = synthesis.render(self.bank, amps, shift=self.shift,
                                 window=self.window, num_threads=self.num_threads,
                                 impl=self.impl)
        return audio, self.shift

    def grad(self, ctx, dout: np.ndarray, num_frames: int) -> np.ndarray:
        return synthesis.render_grad(self.bank, dout, num_frames, shift=ctx,
                                     window=self.window, num_threads=self.num_threads,
                                     impl=self.impl)

    def output_len(self, num_frames: int) -> int:
        return num_frames * self.window


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def init(cls, size: int) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size))


def adam_update(flat: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> np.ndarray:
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.step)
    v_hat = state.v / (1.0 - beta2 ** state.step)
    return flat - lr * m_hat / (np.sqrt(v_hat) + eps)


def _check_finite_grads(grads: dict) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise GradientError(name, f"non-finite gradient in {name}")


def train_step(params: ModelParams, opt: AdamState, batch, renderer,
               rng: np.random.Generator, config: TrainConfig,
               resolutions=DEFAULT_RESOLUTIONS):
    """One optimisation step; returns (updated params, batch-mean loss)."""
    target, controls = batch
    renderer.begin_step(rng)
    amps, _, cache = forward(params, controls, want_cache=True)
    b, t, _ = amps.shape

    losses = np.empty(b)
    damps = np.empty_like(amps)
    for i in range(b):
        pred, ctx = renderer.render(amps[i])
        pred = pred[: target.shape[1]]
        loss_i, dout = mrstft_and_grad(pred, target[i], resolutions)
        losses[i] = loss_i
        if dout.shape[0] < renderer.output_len(t):
            dout = np.concatenate([dout, np.zeros(renderer.output_len(t) - dout.shape[0])])
        damps[i] = renderer.grad(ctx, dout / b, t)
    loss = float(losses.mean())
    if not np.isfinite(loss):
        raise TrainingError(
            f"non-finite loss {loss} (per-item: {losses.tolist()}, step {opt.step + 1})")

    grads = backward(params, cache, damps)
    _check_finite_grads(grads)
    flat_grad = np.concatenate([grads[n].reshape(-1) for n in param_names(params.config)])
    new_flat = adam_update(pack_params(params), flat_grad, opt, config.lr)
    return unpack_params(params.config, new_flat), loss


def validation_loss(params: ModelParams, dataset: Dataset, renderer,
                    config: TrainConfig, resolutions=DEFAULT_RESOLUTIONS) -> float:
    """Loss on the frozen offset-0 chunk at shift 0 (no rolling, no sampling)."""
    chunk = dataset.audio[: config.chunk_len]
    t_internal = config.chunk_len // config.window
    controls = np.stack(
        [resample_curve(dataset.control_matrix[: config.chunk_len, c], t_internal)
         for c in range(dataset.num_controls)], axis=1)
    amps, _ = forward(params, controls)
    saved = getattr(renderer, "shift", None)
    if saved is not None:
        renderer.shift = 0
    pred, _ = renderer.render(amps)
    if saved is not None:
        renderer.shift = saved
    return mrstft(pred[: chunk.shape[0]], chunk, resolutions)


@dataclass
class TrainResult:
    params: ModelParams
    losses: list[float]
    val_before: float
    val_after: float


def train(params: ModelParams, dataset: Dataset, renderer, config: TrainConfig,
          run_dir: str | os.PathLike | None = None, checkpoint_meta: dict | None = None,
          progress=None) -> TrainResult:
    """Run epochs * steps_per_epoch optimisation steps.

    run_dir, when given, receives a config snapshot, a step/loss CSV, and
    periodic + final checkpoints. progress, when given, is called with
    (step, total_steps, loss).
    """
    rng = np.random.Generator(np.random.Philox(config.seed))
    opt = AdamState.init(pack_params(params).size)
    total = config.epochs * steps_per_epoch(dataset, config)
    resolutions = usable_resolutions(config.chunk_len)

    writer = None
    log_fh = None
    if run_dir is not None:
        os.makedirs(run_dir, exist_ok=True)
        with open(os.path.join(run_dir, "config.json"), "w") as fh:
            json.dump({"train": config.__dict__, "model": params.config.__dict__,
                       "backend": renderer.backend}, fh, indent=2)
        log_fh = open(os.path.join(run_dir, "loss.csv"), "w", newline="")
        writer = csv.writer(log_fh)
        writer.writerow(["step", "loss"])

    val_before = validation_loss(params, dataset, renderer, config, resolutions)
    losses: list[float] = []
    try:
        for step in range(1, total + 1):
            batch = sample_batch(dataset, config, rng)
            params, loss = train_step(params, opt, batch, renderer, rng, config,
                                      resolutions)
            losses.append(loss)
            if writer is not None:
                writer.writerow([step, f"{loss:.6f}"])
            if progress is not None:
                progress(step, total, loss)
            if (run_dir is not None and config.checkpoint_every
                    and step % config.checkpoint_every == 0):
                _write_run_checkpoint(run_dir, params, dataset, config,
                                      checkpoint_meta, f"step{step:06d}")
    finally:
        if log_fh is not None:
            log_fh.close()

    val_after = validation_loss(params, dataset, renderer, config, resolutions)
    if run_dir is not None:
        _write_run_checkpoint(run_dir, params, dataset, config, checkpoint_meta, "final")
    return TrainResult(params=params, losses=losses,
                       val_before=val_before, val_after=val_after)


def _write_run_checkpoint(run_dir, params, dataset, config, meta, tag):
    meta = dict(meta or {})
    save_checkpoint(os.path.join(run_dir, f"model-{tag}.nbck"), params,
                    controls=dataset.controls, window=config.window,
                    sample_rate=dataset.sample_rate,
                    bank_hash=meta.get("bank_hash"), bank_seed=meta.get("bank_seed"),
                    backend=meta.get("backend", "bands"), taps=meta.get("taps"))


def smoothed(losses, window: int = 19) -> float:
    """Mean of the last `window` values, the convention for quoting a run."""
    if not len(losses):
        raise TrainingError("no losses to smooth")
    tail = list(losses)[-window:]
    return float(np.mean(tail))


def save_checkpoint(path: str | os.PathLike, params: ModelParams,
                    controls: list[ControlCurve], window: int, sample_rate: float,
                    bank_hash: bytes | str | None = None, bank_seed: int | None = None,
                    backend: str = "bands", taps: int | None = None) -> None:
    if isinstance(bank_hash, bytes):
        bank_hash = bank_hash.hex()
    header = {
        "model": dict(params.config.__dict__),
        "controls": [{"name": c.name, "norm_min": c.norm_min, "norm_max": c.norm_max}
                     for c in controls],
        "window": window,
        "sample_rate": sample_rate,
        "bank_hash": bank_hash,
        "bank_seed": bank_seed,
        "backend": backend,
        "taps": taps,
    }
    blob = json.dumps(header).encode("utf-8")
    flat = pack_params(params).astype("<f4")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(flat.tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> tuple[ModelParams, dict]:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ModelError(f"{path}: not a checkpoint file")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise ModelError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        config = ModelConfig(**header["model"])
        expected = sum(int(np.prod(s)) for s in param_shapes(config).values())
        flat = np.frombuffer(fh.read(expected * 4), dtype="<f4").astype(np.float64)
        if flat.shape[0] != expected:
            raise ModelError(f"{path}: truncated parameter payload")
    return unpack_params(config, flat), header
