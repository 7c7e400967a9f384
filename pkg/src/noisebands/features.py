"""Control features (loudness, spectral centroid), normalisation, resampling.

Loudness is A-weighted log frame power: STFT with FFT 128 / hop 32 / Hann
window, A-weighting applied to the power spectrum, summed, expressed in dB
with the power normalised so a full-scale 1 kHz sine reads near 0 dB,
floored at -80 dB. The centroid is the magnitude-weighted mean frequency
per frame (FFT 512 / hop 128). Both use the same centered reflect-padded
framing as the loss module, so frame t anchors sample t*hop.

Curves are min-max normalised over a whole dataset (never per clip) and
the bounds kept for inference. The .nbcv file format at the bottom stores
one curve: magic "NBCV", version, name, rate tag, bounds, float32 values.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CurveError
from .loss import periodic_hann, _frame

LOUDNESS_FFT = 128
LOUDNESS_HOP = 32
CENTROID_FFT = 512
CENTROID_HOP = 128
LOUDNESS_FLOOR_DB = -80.0
CENTROID_SILENCE = 1e-8

RATE_AUDIO = "audio"
RATE_INTERNAL = "internal"
_RATE_TAGS = {RATE_AUDIO: 0, RATE_INTERNAL: 1}

CURVE_MAGIC = b"NBCV"
CURVE_VERSION = 1


@dataclass
class ControlCurve:
    name: str
    values: np.ndarray = field(repr=False)  # normalised to [0, 1]
    rate: str = RATE_AUDIO
    norm_min: float = 0.0
    norm_max: float = 1.0

    def __post_init__(self):
        if self.rate not in _RATE_TAGS:
            raise CurveError(f"unknown rate {self.rate!r}")
        if not self.norm_min < self.norm_max:
            raise CurveError(f"degenerate bounds [{self.norm_min}, {self.norm_max}]")

    def denormalize(self) -> np.ndarray:
        return self.values * (self.norm_max - self.norm_min) + self.norm_min


def a_weighting(freqs: np.ndarray) -> np.ndarray:
    """Linear-amplitude A-weighting (IEC 61672), 1.0 at roughly 1 kHz."""
    f2 = np.asarray(freqs, dtype=np.float64) ** 2
    num = 12194.0 ** 2 * f2 ** 2
    den = ((f2 + 20.6 ** 2)
           * np.sqrt((f2 + 107.7 ** 2) * (f2 + 737.9 ** 2))
           * (f2 + 12194.0 ** 2))
    ra = np.divide(num, den, out=np.zeros_like(f2), where=den > 0.0)
    return ra * 10.0 ** (2.0 / 20.0)


def extract_loudness(audio: np.ndarray, sample_rate: float,
                     fft_size: int = LOUDNESS_FFT, hop: int = LOUDNESS_HOP) -> np.ndarray:
    """Per-frame A-weighted loudness in dB, shape (ceil(len/hop),)."""
    audio = np.asarray(audio, dtype=np.float64)
    if audio.size == 0:
        raise CurveError("cannot extract loudness from empty audio")
    window = periodic_hann(fft_size)
    frames, _, _, _ = _frame(audio, fft_size, hop)
    power = np.abs(np.fft.rfft(frames * window, axis=-1)) ** 2
    weight = a_weighting(np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)) ** 2
    fold = np.full(fft_size // 2 + 1, 2.0)  # one-sided spectrum doubling
    fold[0] = fold[-1] = 1.0
    # Parseval normalisation: sum(fold * |X|^2) / fft equals the windowed
    # frame's energy, and a unit-amplitude sine carries (window**2).sum()/2
    # of it - so a full-scale sine reads 0 dB at any frequency alignment
    scale = fft_size * float(np.sum(window ** 2)) / 2.0
    frame_power = (power * weight * fold).sum(axis=-1) / scale
    floor = 10.0 ** (LOUDNESS_FLOOR_DB / 10.0)
    return 10.0 * np.log10(np.maximum(frame_power, floor))


def extract_centroid(audio: np.ndarray, sample_rate: float,
                     fft_size: int = CENTROID_FFT, hop: int = CENTROID_HOP) -> np.ndarray:
    """Per-frame spectral centroid in Hz; silent frames hold the last value."""
    audio = np.asarray(audio, dtype=np.float64)
    if audio.size == 0:
        raise CurveError("cannot extract centroid from empty audio")
    window = periodic_hann(fft_size)
    frames, _, _, _ = _frame(audio, fft_size, hop)
    mag = np.abs(np.fft.rfft(frames * window, axis=-1))
    freqs = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)
    totals = mag.sum(axis=-1)
    active = totals >= CENTROID_SILENCE
    centroid = np.zeros(mag.shape[0])
    centroid[active] = (mag[active] * freqs).sum(axis=-1) / totals[active]
    # forward-fill silent frames with the previous active value (0 at start)
    idx = np.where(active, np.arange(centroid.shape[0]), -1)
    idx = np.maximum.accumulate(idx)
    filled = np.where(idx >= 0, centroid[np.maximum(idx, 0)], 0.0)
    return filled


def normalize_feature(name: str, values: np.ndarray, rate: str = RATE_AUDIO) -> ControlCurve:
    """Min-max normalise one feature series over its full extent."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if not lo < hi:
        raise CurveError(
            f"feature {name!r} is constant ({lo}); min-max normalisation is degenerate")
    return ControlCurve(name=name, values=(values - lo) / (hi - lo),
                        rate=rate, norm_min=lo, norm_max=hi)


def normalize_dataset(raw: dict[str, np.ndarray], rate: str = RATE_AUDIO) -> dict[str, ControlCurve]:
    """Normalise each named feature over the whole (already concatenated) dataset."""
    return {name: normalize_feature(name, values, rate) for name, values in raw.items()}


def resample_curve(values: np.ndarray, target_len: int) -> np.ndarray:
    """Linear interpolation onto target_len points spanning the same extent."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0 or target_len < 1:
        raise CurveError("resample_curve needs a nonempty curve and target_len >= 1")
    if values.size == 1:
        return np.full(target_len, values[0])
    src = np.arange(values.shape[0], dtype=np.float64)
    dst = np.linspace(0.0, values.shape[0] - 1.0, target_len)
    return np.interp(dst, src, values)


def save_curve(curve: ControlCurve, path: str | os.PathLike) -> None:
    name_bytes = curve.name.encode("utf-8")
    if len(name_bytes) > 0xFFFF:
        raise CurveError("curve name too long")
    payload = np.asarray(curve.values, dtype="<f4").tobytes()
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(CURVE_MAGIC)
        fh.write(struct.pack("<IH", CURVE_VERSION, len(name_bytes)))
        fh.write(name_bytes)
        fh.write(struct.pack("<BQdd", _RATE_TAGS[curve.rate],
                             curve.values.shape[0], curve.norm_min, curve.norm_max))
        fh.write(payload)
    os.replace(tmp, path)


def _read_exact(fh, count: int, path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CurveError(f"{path}: truncated {what}")
    return data


def load_curve(path: str | os.PathLike) -> ControlCurve:
    with open(path, "rb") as fh:
        if fh.read(4) != CURVE_MAGIC:
            raise CurveError(f"{path}: not a control-curve file")
        version, name_len = struct.unpack("<IH", _read_exact(fh, 6, path, "header"))
        if version != CURVE_VERSION:
            raise CurveError(f"{path}: unsupported curve version {version}")
        name = _read_exact(fh, name_len, path, "header").decode("utf-8")
        rate_tag, length, lo, hi = struct.unpack(
            "<BQdd", _read_exact(fh, 25, path, "header"))
        rate = {v: k for k, v in _RATE_TAGS.items()}.get(rate_tag)
        if rate is None:
            raise CurveError(f"{path}: unknown rate tag {rate_tag}")
        payload = _read_exact(fh, length * 4, path, "payload")
        values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return ControlCurve(name=name, values=values, rate=rate, norm_min=lo, norm_max=hi)
