"""WAV reading and writing (float32 or 16-bit PCM) on top of scipy."""

from __future__ import annotations

import io
import os

import numpy as np
from scipy.io import wavfile

from .errors import NoiseBandsError


def read_wav(path: str | os.PathLike, mono: bool = True) -> tuple[float, np.ndarray]:
    """Read a WAV file as float64 in [-1, 1]; multichannel averaged to mono."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        audio = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        audio = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        audio = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        audio = data.astype(np.float64)
    else:
        raise NoiseBandsError(f"{path}: unsupported WAV sample format {data.dtype}")
    if mono and audio.ndim > 1:
        audio = audio.mean(axis=1)
    return float(rate), audio


def _to_pcm16(data: np.ndarray) -> np.ndarray:
    # scale by 32768 to mirror the reader; clip the integer code so +1.0
    # lands on 32767 instead of overflowing
    return np.clip(np.round(data * 32768.0), -32768.0, 32767.0).astype(np.int16)


def write_wav(path: str | os.PathLike, sample_rate: float, audio: np.ndarray,
              pcm16: bool = False) -> None:
    """Write mono (N,) or multichannel (N, C) audio atomically."""
    data = np.asarray(audio)
    if data.ndim == 2 and data.shape[0] < data.shape[1]:
        data = data.T  # accept channel-major input
    if pcm16:
        out = _to_pcm16(data)
    else:
        out = data.astype(np.float32)
    tmp = f"{path}.tmp.{os.getpid()}"
    wavfile.write(tmp, int(round(sample_rate)), out)
    os.replace(tmp, path)


def wav_bytes(sample_rate: float, audio: np.ndarray, pcm16: bool = False) -> bytes:
    """Encode audio as in-memory WAV bytes (for the HTTP service)."""
    data = np.asarray(audio)
    if data.ndim == 2 and data.shape[0] < data.shape[1]:
        data = data.T
    if pcm16:
        encoded = _to_pcm16(data)
    else:
        encoded = data.astype(np.float32)
    buf = io.BytesIO()
    wavfile.write(buf, int(round(sample_rate)), encoded)
    return buf.getvalue()
