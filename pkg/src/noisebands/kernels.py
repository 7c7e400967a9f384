"""Backend selection for the band-mixing kernels.

The compiled extension is preferred; the numpy implementation is the
fallback. Set NOISEBANDS_FORCE_NUMPY=1 to force the fallback (used by the
benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

import numpy as np

from . import _mix_py

if os.environ.get("NOISEBANDS_FORCE_NUMPY"):
    _impl = _mix_py
    BACKEND = "numpy"
else:
    try:
        from . import _mix as _impl  # type: ignore[attr-defined]
        BACKEND = "ext"
    except ImportError:
        _impl = _mix_py
        BACKEND = "numpy"


def backend() -> str:
    return BACKEND


def available_backends() -> dict:
    """All importable kernel implementations, keyed by name."""
    impls = {"numpy": _mix_py}
    try:
        from . import _mix  # type: ignore[attr-defined]
        impls["ext"] = _mix
    except ImportError:
        pass
    return impls


def _as_bands(bands: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(bands, dtype=np.float32)


def _resolve(impl):
    """Accept None (selected backend), a backend name, or a module."""
    if impl is None:
        return _impl
    if isinstance(impl, str):
        impls = available_backends()
        if impl not in impls:
            raise ValueError(f"unknown kernel backend {impl!r}; have {sorted(impls)}")
        return impls[impl]
    return impl


def mix_render(amps: np.ndarray, bands: np.ndarray, shift: int, *,
               sample_offset: int = 0, window: int = 32,
               next_frame: np.ndarray | None = None,
               num_threads: int = 0, impl=None) -> np.ndarray:
    """Mix amplitude frames (M, T) with looping bands (M, L) into T*W samples."""
    f = _resolve(impl).mix_render
    return f(np.ascontiguousarray(amps, dtype=np.float64), _as_bands(bands),
             int(shift), int(sample_offset), int(window), next_frame,
             int(num_threads))


def mix_adjoint(grad_out: np.ndarray, bands: np.ndarray, shift: int, *,
                sample_offset: int = 0, window: int = 32,
                num_threads: int = 0, impl=None) -> np.ndarray:
    """Adjoint of mix_render w.r.t. the (M, T) amplitude frames."""
    f = _resolve(impl).mix_adjoint
    return f(np.ascontiguousarray(grad_out, dtype=np.float64), _as_bands(bands),
             int(shift), int(sample_offset), int(window), int(num_threads))
