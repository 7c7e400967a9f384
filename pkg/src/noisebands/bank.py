"""Deterministic loopable noise bands baked from a filterbank.

Each band is the inverse FFT of the filter's magnitude spectrum with fresh
uniform random phase (DC and Nyquist pinned to zero). The circular
construction makes end-to-start concatenation seamless, so a band can be
extended forever by modulo indexing. Baking is done once and cached in the
.nbnb format below; training and synthesis never re-run the filtering.

Cache layout (little-endian):
  magic "NBNB" | u32 version | f64 sample_rate | u32 M | u32 padded_len |
  u64 seed | 16s generator tag | 32s filterbank config hash |
  payload: M consecutive bands of float32
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import CacheFormatError, CacheMismatchError
from .filterbank import Filterbank, FilterbankConfig, config_hash, iter_designs, padded_length

MAGIC = b"NBNB"
VERSION = 1
GENERATOR_TAG = b"philox-blake2b-1"
_HEADER = struct.Struct("<4sIdIIQ16s32s")


@dataclass
class NoiseBandBank:
    bands: np.ndarray = field(repr=False)  # (M, padded_len) float32, looping
    a_max: float
    seed: int
    config_hash: bytes
    sample_rate: float

    @property
    def num_bands(self) -> int:
        return self.bands.shape[0]

    @property
    def padded_len(self) -> int:
        return self.bands.shape[1]


def band_seed(seed: int, band_index: int) -> int:
    """Per-band phase seed, a keyed hash of (global seed, band index)."""
    digest = hashlib.blake2b(
        struct.pack("<QQ", seed & 0xFFFFFFFFFFFFFFFF, band_index), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def bake_band(padded_ir: np.ndarray, band_seed: int) -> np.ndarray:
    """Magnitude-preserving random-phase resynthesis of one impulse response.

    Keeps |FFT| of the filter exactly, replaces the phase of every interior
    bin with a uniform draw in [-pi, pi] (counter-based Philox stream), and
    inverts. Output is real with length equal to the input.
    """
    n = int(padded_ir.shape[0])
    if n == 0 or n & (n - 1):
        raise CacheFormatError(f"band length must be a power of two, got {n}")
    mag = np.abs(np.fft.rfft(np.asarray(padded_ir, dtype=np.float64)))
    rng = np.random.Generator(np.random.Philox(band_seed))
    phase = np.zeros(mag.shape[0])
    phase[1:-1] = rng.uniform(-np.pi, np.pi, mag.shape[0] - 2)
    return np.fft.irfft(mag * np.exp(1j * phase), n)


def _bake(irs: Iterable[np.ndarray], num_bands: int, padded_len: int, seed: int,
          cfg_hash: bytes, sample_rate: float) -> NoiseBandBank:
    bands = np.empty((num_bands, padded_len), dtype=np.float32)
    a_max = 0.0
    for i, ir in enumerate(irs):
        baked = bake_band(ir, band_seed(seed, i))
        a_max = max(a_max, float(np.abs(baked).max()))
        bands[i] = baked.astype(np.float32)
    bands /= np.float32(a_max)
    return NoiseBandBank(bands=bands, a_max=a_max, seed=seed,
                         config_hash=cfg_hash, sample_rate=sample_rate)


def bake_bank(fb: Filterbank, seed: int) -> NoiseBandBank:
    """Bake every band of a built filterbank; scale the bank by its global peak."""
    return _bake(fb.impulse_responses, len(fb.edges), fb.padded_len, seed,
                 config_hash(fb.config), fb.config.sample_rate)


def bake_bank_config(config: FilterbankConfig, seed: int) -> NoiseBandBank:
    """Design-and-bake streamed per band; peak memory is one bank, not two.

    Preferred at full scale (2048 filters -> ~1 GB of bands) where holding
    all padded impulse responses alongside the bands would double the
    footprint.
    """
    padded = padded_length(config)

    def irs():
        buf = np.zeros(padded, dtype=np.float64)
        for _, taps in iter_designs(config):
            buf[:] = 0.0
            buf[: taps.shape[0]] = taps
            yield buf

    return _bake(irs(), config.num_filters, padded, seed,
                 config_hash(config), config.sample_rate)


def band_sample(bank: NoiseBandBank, m: int, n, shift: int = 0):
    """Sample band m at position n with a circular shift; loops forever."""
    if not 0 <= m < bank.num_bands:
        raise IndexError(f"band index {m} out of range [0, {bank.num_bands})")
    idx = (np.asarray(n) + shift) % bank.padded_len
    return bank.bands[m][idx]


def payload_bytes(config: FilterbankConfig) -> int:
    """On-disk payload size of a bank baked from this configuration."""
    return config.num_filters * padded_length(config) * 4


def save_cache(bank: NoiseBandBank, path: str | os.PathLike) -> None:
    header = _HEADER.pack(MAGIC, VERSION, bank.sample_rate, bank.num_bands,
                          bank.padded_len, bank.seed & 0xFFFFFFFFFFFFFFFF,
                          GENERATOR_TAG, bank.config_hash)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(header)
        # a_max rides along after the fixed header so loads can report it
        fh.write(struct.pack("<d", bank.a_max))
        fh.write(np.ascontiguousarray(bank.bands, dtype="<f4").tobytes())
    os.replace(tmp, path)


def load_cache(path: str | os.PathLike, expect_config: FilterbankConfig | None = None,
               expect_seed: int | None = None, mmap: bool = False) -> NoiseBandBank:
    """Load a baked bank; verifies header integrity and optional provenance.

    Raises FileNotFoundError for a missing file, CacheFormatError for a
    corrupt one, CacheMismatchError when the file belongs to a different
    configuration or seed than the caller expects.
    """
    size = os.path.getsize(path)  # propagates FileNotFoundError
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise CacheFormatError(f"{path}: truncated header")
        magic, version, fs, m, padded, seed, gen, cfg_hash = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise CacheFormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise CacheFormatError(f"{path}: unsupported version {version}")
        if gen != GENERATOR_TAG:
            raise CacheMismatchError(
                f"{path}: bank was baked with generator {gen!r}, this release uses "
                f"{GENERATOR_TAG!r}")
        a_max = struct.unpack("<d", fh.read(8))[0]
        expected = _HEADER.size + 8 + m * padded * 4
        if size != expected:
            raise CacheFormatError(f"{path}: payload size {size} != expected {expected}")
        if mmap:
            bands = np.memmap(path, dtype="<f4", mode="r",
                              offset=_HEADER.size + 8, shape=(m, padded))
        else:
            bands = np.fromfile(fh, dtype="<f4", count=m * padded).reshape(m, padded)

    if expect_config is not None and config_hash(expect_config) != cfg_hash:
        raise CacheMismatchError(f"{path}: config hash mismatch")
    if expect_seed is not None and (expect_seed & 0xFFFFFFFFFFFFFFFF) != seed:
        raise CacheMismatchError(f"{path}: seed mismatch ({seed} on disk)")
    return NoiseBandBank(bands=bands, a_max=a_max, seed=seed,
                         config_hash=cfg_hash, sample_rate=fs)
