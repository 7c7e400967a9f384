"""Comparison synthesiser: network-predicted time-varying FIR over noise.

The trunk is the same control network, but the head predicts taps//2 + 1
filter magnitudes per frame instead of band amplitudes. Rendering turns
each magnitude vector into a zero-phase impulse response (inverse DFT of
the magnitudes, rotated to causal, Hann-windowed), convolves it with that
frame's fresh white-noise segment, and overlap-adds at the hop.

Rendering is linear in the magnitudes, so its adjoint below is exact and
the training loop can reuse the shared model/loss gradients.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .errors import ModelError
from .model import ModelConfig

DEFAULT_HOP = 32


def baseline_config(num_controls: int, taps: int, hidden_size: int = 128,
                    output_depth: int = 3) -> ModelConfig:
    """Trunk config whose head emits taps//2 + 1 filter magnitudes."""
    if taps < 2 or taps % 2:
        raise ModelError(f"taps must be even and >= 2, got {taps}")
    return ModelConfig(num_controls=num_controls, hidden_size=hidden_size,
                       num_bands=taps // 2 + 1, output_depth=output_depth)


def _frame_irs(magnitudes: np.ndarray, taps: int) -> np.ndarray:
    """(T, taps//2+1) magnitudes -> (T, taps) causal windowed impulse responses."""
    mags = np.asarray(magnitudes, dtype=np.float64)
    if mags.ndim != 2 or mags.shape[1] != taps // 2 + 1:
        raise ModelError(f"magnitude shape {mags.shape} mismatches taps {taps}")
    zero_phase = np.fft.irfft(mags, n=taps, axis=-1)
    causal = np.roll(zero_phase, taps // 2, axis=-1)
    return causal * np.hanning(taps)


def render_baseline(magnitudes: np.ndarray, taps: int, hop: int,
                    rng: np.random.Generator,
                    return_ctx: bool = False):
    """Convolve per-frame FIRs with white-noise segments and overlap-add.

    Output length is frames*hop + taps - 1; callers crop to their target.
    """
    irs = _frame_irs(magnitudes, taps)
    frames = irs.shape[0]
    noise = rng.uniform(-1.0, 1.0, (frames, hop))
    segs = fftconvolve(noise, irs, mode="full", axes=-1)  # (T, hop+taps-1)
    seg_len = hop + taps - 1
    out = np.zeros(frames * hop + taps - 1)
    k = -(-seg_len // hop)
    buf = np.zeros((frames - 1 + k, hop))
    padded = np.zeros((frames, k * hop))
    padded[:, :seg_len] = segs
    chunks = padded.reshape(frames, k, hop)
    for c in range(k):
        buf[c: c + frames] += chunks[:, c, :]
    out[:] = buf.reshape(-1)[: out.shape[0]]
    if return_ctx:
        return out, {"noise": noise, "taps": taps, "hop": hop}
    return out


def render_baseline_grad(ctx: dict, dout: np.ndarray) -> np.ndarray:
    """Adjoint of render_baseline wrt the magnitudes (exact; render is linear)."""
    noise, taps, hop = ctx["noise"], ctx["taps"], ctx["hop"]
    frames = noise.shape[0]
    seg_len = hop + taps - 1
    full_len = frames * hop + taps - 1
    if dout.shape[0] < full_len:
        dout = np.concatenate([dout, np.zeros(full_len - dout.shape[0])])
    # gather each frame's output segment, correlate with its noise
    dsegs = np.empty((frames, seg_len))
    for t in range(frames):
        dsegs[t] = dout[t * hop: t * hop + seg_len]
    matched = fftconvolve(dsegs, noise[:, ::-1], mode="full", axes=-1)
    dirs = matched[:, hop - 1: hop - 1 + taps]
    # back through the window and the causal rotation
    dzero = np.roll(dirs * np.hanning(taps), -(taps // 2), axis=-1)
    # adjoint of irfft on a real magnitude vector: real part of rfft, bin-weighted
    weights = np.full(taps // 2 + 1, 2.0)
    weights[0] = weights[-1] = 1.0
    return np.real(np.fft.rfft(dzero, axis=-1)) * weights / taps


class BaselineRenderer:
    """Training-loop adapter mirroring training.BandRenderer."""

    backend = "baseline"

    def __init__(self, taps: int, hop: int = DEFAULT_HOP, seed: int = 0):
        if taps % 2:
            raise ModelError("taps must be even")
        self.taps = taps
        self.hop = hop
        self._rng = np.random.Generator(np.random.Philox(seed))

    def begin_step(self, rng: np.random.Generator) -> None:
        pass  # fresh noise is drawn inside render from the run stream

    def render(self, magnitudes: np.ndarray):
        return render_baseline(magnitudes, self.taps, self.hop, self._rng,
                               return_ctx=True)

    def grad(self, ctx, dout: np.ndarray, num_frames: int) -> np.ndarray:
        return render_baseline_grad(ctx, dout)

    def output_len(self, num_frames: int) -> int:
        return num_frames * self.hop + self.taps - 1
