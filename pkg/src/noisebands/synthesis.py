"""Turn frame-rate amplitude envelopes into audio by mixing noise bands.

Frame t anchors sample t*window; between anchors the per-band amplitudes
are linearly interpolated. The final frame holds its value unless a bridge
column (the first frame of the following chunk) is supplied, which is how
chunked streaming stays bit-compatible with a single long render.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .bank import NoiseBandBank
from .model import ModelParams, forward

DEFAULT_WINDOW = 32


def upsample(amps: np.ndarray, window: int = DEFAULT_WINDOW,
             next_frame: np.ndarray | None = None) -> np.ndarray:
    """Reference linear-interpolation upsampler, (T, M) -> (M, T*window).

    The fused kernels never materialise this matrix; it exists for tests
    and inspection.
    """
    a = np.asarray(amps, dtype=np.float64).T  # (M, T)
    m, t = a.shape
    last = a[:, -1] if next_frame is None else np.asarray(next_frame, np.float64)
    a_next = np.concatenate([a[:, 1:], last[:, None]], axis=1)
    frac = np.arange(window) / window
    out = a[:, :, None] * (1.0 - frac) + a_next[:, :, None] * frac
    return out.reshape(m, t * window)


def render(bank: NoiseBandBank, amps: np.ndarray, shift: int = 0,
           sample_offset: int = 0, window: int = DEFAULT_WINDOW,
           next_frame: np.ndarray | None = None, num_threads: int = 0,
           impl: str | None = None) -> np.ndarray:
    """Mix the bank under interpolated amplitudes; output length is T*window.

    shift rotates every band's loop (the training augmentation);
    sample_offset positions this chunk inside a longer stream so band
    phase continues across chunk boundaries.
    """
    a = np.ascontiguousarray(np.asarray(amps, dtype=np.float64).T)
    return kernels.mix_render(a, bank.bands, shift, sample_offset=sample_offset,
                              window=window, next_frame=next_frame,
                              num_threads=num_threads, impl=impl)


def render_grad(bank: NoiseBandBank, grad_out: np.ndarray, num_frames: int,
                shift: int = 0, sample_offset: int = 0,
                window: int = DEFAULT_WINDOW, num_threads: int = 0,
                impl: str | None = None) -> np.ndarray:
    """Adjoint of render for the hold-last case: dloss/damps, shape (T, M)."""
    damps = kernels.mix_adjoint(grad_out, bank.bands, shift,
                                sample_offset=sample_offset, window=window,
                                num_threads=num_threads, impl=impl)
    assert damps.shape[1] == num_frames
    return damps.T.copy()


def render_long(params: ModelParams, bank: NoiseBandBank, controls: np.ndarray,
                window: int = DEFAULT_WINDOW, chunk_frames: int = 2048,
                shift: int = 0, num_threads: int = 0,
                impl: str | None = None) -> np.ndarray:
    """Stream an arbitrarily long render in fixed-size chunks.

    Carries the GRU state across chunks and bridges each boundary with the
    next chunk's first amplitude frame, so the output is identical to a
    one-shot render of the full control matrix (the model is causal: that
    bridge frame comes out the same when the next chunk is processed).
    """
    controls = np.asarray(controls, dtype=np.float64)
    t = controls.shape[0]
    out = np.empty(t * window)
    h = None
    pos = 0
    for start in range(0, t, chunk_frames):
        stop = min(start + chunk_frames, t)
        amps, h_next = forward(params, controls[start:stop], h)
        next_col = None
        if stop < t:
            bridge, _ = forward(params, controls[stop: stop + 1], h_next)
            next_col = bridge[0]
        seg = render(bank, amps, shift=shift, sample_offset=pos, window=window,
                     next_frame=next_col, num_threads=num_threads, impl=impl)
        out[pos: pos + seg.shape[0]] = seg
        pos += seg.shape[0]
        h = h_next
    return out
