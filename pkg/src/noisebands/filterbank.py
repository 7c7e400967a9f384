"""Narrow-band FIR filterbank design.

The bank covers [0, Fs/2] with M filters that share band edges: one lowpass,
a linear-spaced region up to Fs/8, a geometric region up to just below
Nyquist, and a final highpass. Filters are designed with the Kaiser window
method from a target stopband attenuation and a transition width expressed
as a fraction of each filter's bandwidth.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from .errors import DesignError, LayoutError

BandKind = Literal["lowpass", "bandpass", "highpass"]

#: DFT grid size used for realised frequency-response measurements.
RESPONSE_GRID = 1 << 18


@dataclass(frozen=True)
class FilterbankConfig:
    sample_rate: float = 44100.0
    num_filters: int = 2048
    f_min: float = 20.0
    transition_fraction: float = 0.2
    stopband_attenuation_db: float = 50.0
    linear_fraction: float = 0.5

    def __post_init__(self):
        if self.num_filters < 2:
            raise LayoutError(f"need at least 2 filters, got {self.num_filters}")
        if not (0.0 < self.f_min < self.sample_rate / 8.0):
            raise LayoutError(
                f"f_min must lie in (0, Fs/8): got {self.f_min} at Fs={self.sample_rate}"
            )
        if not (0.0 < self.transition_fraction < 1.0):
            raise LayoutError("transition_fraction must lie in (0, 1)")
        if self.stopband_attenuation_db <= 0.0:
            raise LayoutError("stopband_attenuation_db must be positive")


@dataclass(frozen=True)
class BandEdges:
    low: float
    high: float
    kind: BandKind

    def __post_init__(self):
        if not self.low < self.high:
            raise DesignError(f"band edges must satisfy low < high: [{self.low}, {self.high}]")

    @property
    def bandwidth(self) -> float:
        return self.high - self.low


@dataclass
class Filterbank:
    config: FilterbankConfig
    edges: list[BandEdges]
    impulse_responses: list[np.ndarray] = field(repr=False)
    padded_len: int = 0


def config_hash(config: FilterbankConfig) -> bytes:
    """32-byte digest identifying a filterbank configuration.

    Canonical JSON keeps the digest stable across processes and releases, so
    baked noise banks can be shared between models built on the same bank.
    """
    doc = {
        "sample_rate": float(config.sample_rate),
        "num_filters": int(config.num_filters),
        "f_min": float(config.f_min),
        "transition_fraction": float(config.transition_fraction),
        "stopband_attenuation_db": float(config.stopband_attenuation_db),
        "linear_fraction": float(config.linear_fraction),
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).digest()


def layout_band_edges(config: FilterbankConfig) -> list[BandEdges]:
    """Place the M filters' shared band edges across [0, Fs/2].

    Filter 1 is a lowpass up to f_min. Half of the bank (minus the lowpass)
    splits [f_min, Fs/8] into equal-width bands; the other half (minus the
    final highpass) splits [Fs/8, Fs/2) with geometrically spaced edges of
    common ratio 4**(1/(M/2)), so bandwidth grows toward Nyquist. The last
    filter is a highpass from the final geometric edge to Fs/2.
    """
    m = config.num_filters
    if m % 2 != 0:
        raise LayoutError(f"filter count must be even, got {m}")
    fs = config.sample_rate
    half = m // 2
    quarter = fs / 8.0

    edges: list[BandEdges] = [BandEdges(0.0, config.f_min, "lowpass")]

    # Linear region: filters 2..M/2 share equal-width bands on [f_min, Fs/8].
    n_lin = half - 1
    if n_lin > 0:
        lin = np.linspace(config.f_min, quarter, n_lin + 1)
        edges.extend(BandEdges(float(lo), float(hi), "bandpass") for lo, hi in zip(lin[:-1], lin[1:]))

    # Geometric region: filters M/2+1..M-1, edge ratio r = 4**(1/(M/2)).
    n_geo = half - 1
    if n_geo > 0:
        ratio = 4.0 ** (1.0 / half)
        geo = quarter * ratio ** np.arange(n_geo + 1)
        edges.extend(BandEdges(float(lo), float(hi), "bandpass") for lo, hi in zip(geo[:-1], geo[1:]))

    edges.append(BandEdges(edges[-1].high, fs / 2.0, "highpass"))
    return edges


def kaiser_beta(attenuation_db: float) -> float:
    """Kaiser window shape parameter for a stopband attenuation in dB."""
    a = attenuation_db
    if a > 50.0:
        return 0.1102 * (a - 8.7)
    if a >= 21.0:
        return 0.5842 * (a - 21.0) ** 0.4 + 0.07886 * (a - 21.0)
    return 0.0


def tap_count(edges: BandEdges, config: FilterbankConfig) -> int:
    """Kaiser-method tap count for one band; always odd.

    The transition width is a fixed fraction of the band's own width, so
    narrow bands produce long filters. Odd length keeps the design a
    symmetric type-I FIR, which stays valid for the final highpass.
    """
    delta_f = config.transition_fraction * edges.bandwidth
    if delta_f <= 0.0:
        raise DesignError(f"non-positive transition width for band [{edges.low}, {edges.high}]")
    delta_w = 2.0 * math.pi * delta_f / config.sample_rate
    n = math.ceil((config.stopband_attenuation_db - 7.95) / (2.285 * delta_w))
    if n % 2 == 0:
        n += 1
    return max(n, 3)


def kaiser_design(edges: BandEdges, config: FilterbankConfig) -> np.ndarray:
    """Design one linear-phase FIR band as a Kaiser-windowed ideal response."""
    fs = config.sample_rate
    if edges.low < 0.0 or edges.high > fs / 2.0 + 1e-9:
        raise DesignError(f"band [{edges.low}, {edges.high}] outside [0, Fs/2]")
    if edges.bandwidth <= 0.0:
        raise DesignError("zero or negative bandwidth")

    n = tap_count(edges, config)
    m = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    hi, lo = 2.0 * edges.high / fs, 2.0 * edges.low / fs
    ideal = hi * np.sinc(hi * m)
    if edges.low > 0.0:
        ideal -= lo * np.sinc(lo * m)
    return ideal * np.kaiser(n, kaiser_beta(config.stopband_attenuation_db))


def iter_designs(config: FilterbankConfig) -> Iterator[tuple[BandEdges, np.ndarray]]:
    """Yield (edges, taps) per filter without holding the whole bank in memory.

    Large configurations (the 2048-filter default runs to ~120k taps per
    narrow band) should stream through this rather than build_filterbank.
    """
    for edges in layout_band_edges(config):
        yield edges, kaiser_design(edges, config)


def padded_length(config: FilterbankConfig) -> int:
    """Common power-of-two length all impulse responses are zero-padded to."""
    longest = max(tap_count(e, config) for e in layout_band_edges(config))
    return 1 << (longest - 1).bit_length()


def build_filterbank(config: FilterbankConfig, workers: int | None = None) -> Filterbank:
    """Design all M filters and zero-pad them to a shared power-of-two length.

    Designs are independent; `workers` threads may design bands in parallel.
    The result is immutable by convention: nothing in the package mutates a
    built bank.
    """
    edges = layout_band_edges(config)
    padded = padded_length(config)

    def one(e: BandEdges) -> np.ndarray:
        h = kaiser_design(e, config)
        out = np.zeros(padded, dtype=np.float64)
        out[: h.shape[0]] = h
        return out

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            irs = list(pool.map(one, edges))
    else:
        irs = [one(e) for e in edges]
    return Filterbank(config=config, edges=edges, impulse_responses=irs, padded_len=padded)


def measure_response(taps: np.ndarray, grid: int = RESPONSE_GRID) -> np.ndarray:
    """Realised magnitude response |H| on a dense rfft grid (grid//2+1 bins)."""
    return np.abs(np.fft.rfft(taps, n=grid))


def stopband_leakage_db(taps: np.ndarray, edges: BandEdges, config: FilterbankConfig,
                        grid: int = RESPONSE_GRID) -> float:
    """Worst stopband magnitude relative to the passband peak, in dB.

    The stopband is taken to start one full transition width beyond each
    nominal edge (the Kaiser transition straddles the edge).
    """
    mag = measure_response(taps, grid)
    freqs = np.fft.rfftfreq(grid, d=1.0 / config.sample_rate)
    delta_f = config.transition_fraction * edges.bandwidth
    stop = np.zeros(freqs.shape[0], dtype=bool)
    if edges.low - delta_f > 0.0:
        stop |= freqs <= edges.low - delta_f
    if edges.high + delta_f < config.sample_rate / 2.0:
        stop |= freqs >= edges.high + delta_f
    if not stop.any():
        return -np.inf
    peak = mag.max()
    worst = mag[stop].max()
    if worst == 0.0:
        return -np.inf
    return 20.0 * math.log10(worst / peak)
