"""Variation generators over amplitude matrices, and loudness transfer.

All matrix operations take the band-major (M, T) layout and act on
non-overlapping frames of frame_len amplitude samples along T, before any
upsampling. They are pure: the input matrix is never mutated.
"""

from __future__ import annotations

import numpy as np

from .bank import NoiseBandBank
from .errors import CurveError, ModelError
from .features import extract_loudness, normalize_feature, resample_curve
from .model import ModelParams, forward
from . import synthesis


def randomize_topk(amps: np.ndarray, frame_len: int, k: int,
                   mult_range: tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    """Rescale the k most energetic bands per frame by random multipliers.

    Band energy within a frame is the sum of its amplitude values there.
    Each selected band gets one uniform draw from mult_range applied to
    all its values in that frame; everything else is untouched.
    """
    amps = np.asarray(amps, dtype=np.float64)
    m, t = amps.shape
    lo, hi = float(mult_range[0]), float(mult_range[1])
    if not 1 <= k <= m:
        raise CurveError(f"k={k} outside [1, {m}]")
    if not 0.0 <= lo <= hi:
        raise CurveError(f"multiplier range [{lo}, {hi}] must satisfy 0 <= lo <= hi")
    if frame_len < 1:
        raise CurveError("frame_len must be >= 1")

    out = amps.copy()
    for start in range(0, t, frame_len):
        seg = out[:, start: start + frame_len]
        energy = seg.sum(axis=1)
        top = np.argpartition(energy, m - k)[m - k:] if k < m else np.arange(m)
        seg[top] *= rng.uniform(lo, hi, top.shape[0])[:, None]
    return out


def randomize_shift(amps: np.ndarray, frame_len: int, f_init: int, f_shift: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Roll the band axis in a per-frame random walk (a frame-wise pitch shift).

    The first frame is rolled by a uniform draw in [-f_init, f_init]; each
    following frame adds a draw in [-f_shift, f_shift] to the running roll.
    Rolls wrap modulo M, so every frame keeps its multiset of values and
    its energy exactly.
    """
    amps = np.asarray(amps, dtype=np.float64)
    m, t = amps.shape
    if frame_len < 1:
        raise CurveError("frame_len must be >= 1")
    out = np.empty_like(amps)
    roll = int(rng.integers(-f_init, f_init, endpoint=True)) if f_init else 0
    for start in range(0, t, frame_len):
        out[:, start: start + frame_len] = np.roll(
            amps[:, start: start + frame_len], roll, axis=0)
        roll += int(rng.integers(-f_shift, f_shift, endpoint=True)) if f_shift else 0
    return out


def channel_variation(amps: np.ndarray, rng: np.random.Generator, frame_len: int,
                      k: int | None = None, mult_range=(0.7, 1.3),
                      f_init: int = 0, f_shift: int = 0) -> tuple[np.ndarray, int]:
    """One randomised take on an amplitude matrix plus a fresh band shift."""
    varied = amps
    if k:
        varied = randomize_topk(varied, frame_len, k, mult_range, rng)
    if f_init or f_shift:
        varied = randomize_shift(varied, frame_len, f_init, f_shift, rng)
    shift = int(rng.integers(0, 1 << 31))
    return varied, shift


def stereo_variation(amps: np.ndarray, seed: int, frame_len: int = 430,
                     k: int | None = 100, mult_range=(0.7, 1.3),
                     f_init: int = 0, f_shift: int = 0):
    """Two independent randomisations of one matrix, for left/right panning.

    Returns ((left_amps, left_shift), (right_amps, right_shift)); the
    shifts are band-loop offsets to pass to render. Both channels derive
    from child streams of `seed`, so one integer reproduces the pair.
    """
    ss = np.random.SeedSequence(seed)
    left_ss, right_ss = ss.spawn(2)
    left = channel_variation(amps, np.random.Generator(np.random.Philox(left_ss)),
                             frame_len, k, mult_range, f_init, f_shift)
    right = channel_variation(amps, np.random.Generator(np.random.Philox(right_ss)),
                              frame_len, k, mult_range, f_init, f_shift)
    return left, right


def loudness_transfer(params: ModelParams, bank: NoiseBandBank,
                      source_audio: np.ndarray, sample_rate: float,
                      offset: float = 0.0, window: int = 32, shift: int = 0,
                      num_threads: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Drive a loudness-only model with another sound's loudness envelope.

    The envelope is extracted and min-max normalised against the source
    itself, nudged by `offset`, clamped to [0, 1], and resampled to the
    internal rate. Returns (audio, control curve); audio length is
    exactly len(control) * window.
    """
    if params.config.num_controls != 1:
        raise ModelError(
            f"loudness transfer needs a single-control model, got C={params.config.num_controls}")
    source_audio = np.asarray(source_audio, dtype=np.float64)
    frames = extract_loudness(source_audio, sample_rate)
    curve = normalize_feature("loudness", frames).values
    curve = np.clip(curve + offset, 0.0, 1.0)
    t_internal = max(1, source_audio.size // window)
    control = resample_curve(curve, t_internal)
    audio = synthesis.render_long(params, bank, control[:, None], window=window,
                                  shift=shift, num_threads=num_threads)
    return audio, control
