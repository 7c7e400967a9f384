"""Multi-resolution STFT loss and its exact gradient.

The loss at one resolution is a spectral-convergence term (Frobenius
distance between magnitude spectrograms, normalised by the reference
magnitude) plus an L1 distance between log magnitudes. The total is the
mean over a ladder of FFT sizes. Gradients are derived by hand and flow
through framing, windowing, rfft, magnitude, and both terms; the adjoint
of each stage mirrors its forward below.
"""

from __future__ import annotations

import numpy as np

from .errors import GradientError

# (fft_size, hop, window_len)
DEFAULT_RESOLUTIONS: tuple[tuple[int, int, int], ...] = tuple(
    (n, n // 4, n) for n in (8192, 4096, 2048, 1024, 512, 128, 32)
)
LOG_EPS = 1e-7


def periodic_hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _pad_amounts(n: int, window_len: int, hop: int) -> tuple[int, int, int]:
    frames = -(-n // hop)
    left = window_len // 2
    right = (frames - 1) * hop + window_len - n - left
    return frames, left, right


def _frame(x: np.ndarray, window_len: int, hop: int):
    n = x.shape[0]
    frames, left, right = _pad_amounts(n, window_len, hop)
    if left >= n or right >= n:
        raise GradientError("stft", f"window {window_len} too long for {n} samples")
    padded = np.pad(x, (left, right), mode="reflect")
    windows = np.lib.stride_tricks.sliding_window_view(padded, window_len)[::hop]
    return windows, frames, left, right


def stft_mag(x: np.ndarray, fft_size: int, hop: int,
             window_len: int | None = None) -> np.ndarray:
    """Centered magnitude spectrogram, shape (ceil(len/hop), fft_size//2+1).

    Frame t is anchored at sample t*hop; the signal is reflect-padded by
    half a window on the left so the anchor sits at the frame centre.
    Windows shorter than fft_size are zero-padded before the transform.
    """
    if window_len is None:
        window_len = fft_size
    if window_len > fft_size or hop < 1:
        raise GradientError("stft", "need window_len <= fft_size and hop >= 1")
    x = np.asarray(x, dtype=np.float64)
    windows, _, _, _ = _frame(x, window_len, hop)
    return np.abs(np.fft.rfft(windows * periodic_hann(window_len), n=fft_size, axis=-1))


def _overlap_add_adjoint(dframes: np.ndarray, n: int, window_len: int, hop: int,
                         left: int, right: int) -> np.ndarray:
    """Scatter per-frame gradients back onto the unpadded signal."""
    num = dframes.shape[0]
    if window_len % hop:
        padded = np.zeros(left + n + right)
        for t in range(num):
            padded[t * hop: t * hop + window_len] += dframes[t]
    else:
        k = window_len // hop
        buf = np.zeros((num - 1 + k, hop))
        chunks = dframes.reshape(num, k, hop)
        for c in range(k):
            buf[c: c + num] += chunks[:, c, :]
        padded = buf.reshape(-1)[: left + n + right]
    # fold the reflect padding back: padded[j] mirrored x[left-j] on the
    # left and x[n-2-i] on the right, so their gradients accumulate there
    dx = padded[left: left + n].copy()
    if left:
        dx[1: left + 1] += padded[:left][::-1]
    if right:
        dx[n - 1 - right: n - 1] += padded[left + n:][::-1]
    return dx


def _resolution_loss(pred_mag: np.ndarray, target_mag: np.ndarray):
    diff = pred_mag - target_mag
    diff_norm = float(np.linalg.norm(diff))
    target_norm = max(float(np.linalg.norm(target_mag)), 1e-12)
    sc = diff_norm / target_norm

    log_pred = np.log(np.maximum(pred_mag, LOG_EPS))
    log_target = np.log(np.maximum(target_mag, LOG_EPS))
    log_l1 = float(np.mean(np.abs(log_pred - log_target)))
    return sc, log_l1, diff, diff_norm, target_norm, log_pred, log_target


def _resolution_grad(pred_mag, diff, diff_norm, target_norm, log_pred, log_target):
    dmag = np.zeros_like(pred_mag)
    if diff_norm > 0.0:
        dmag += diff / (diff_norm * target_norm)
    active = pred_mag > LOG_EPS
    sign = np.sign(log_pred - log_target)
    dmag[active] += sign[active] / pred_mag[active] / pred_mag.size
    return dmag


def usable_resolutions(n: int, resolutions=DEFAULT_RESOLUTIONS):
    """Drop ladder rungs whose window would not fit n samples."""
    keep = []
    for fft_size, hop, window_len in resolutions:
        _, left, right = _pad_amounts(n, window_len, hop)
        if left < n and right < n:
            keep.append((fft_size, hop, window_len))
    return tuple(keep)


def mrstft(pred: np.ndarray, target: np.ndarray,
           resolutions=DEFAULT_RESOLUTIONS) -> float:
    loss, _ = _mrstft_impl(np.asarray(pred, np.float64),
                           np.asarray(target, np.float64), resolutions, False)
    return loss


def mrstft_and_grad(pred: np.ndarray, target: np.ndarray,
                    resolutions=DEFAULT_RESOLUTIONS) -> tuple[float, np.ndarray]:
    """Loss and dloss/dpred. The target is a constant; no gradient flows to it."""
    return _mrstft_impl(np.asarray(pred, np.float64),
                        np.asarray(target, np.float64), resolutions, True)


def _mrstft_impl(pred, target, resolutions, want_grad):
    if pred.shape != target.shape:
        raise GradientError("mrstft", f"shape mismatch {pred.shape} vs {target.shape}")
    usable = usable_resolutions(pred.shape[0], resolutions)
    if not usable:
        raise GradientError("mrstft", f"no resolution fits {pred.shape[0]} samples")

    n = pred.shape[0]
    total = 0.0
    grad = np.zeros(n) if want_grad else None
    for fft_size, hop, window_len in usable:
        window = periodic_hann(window_len)
        windows, frames, left, right = _frame(pred, window_len, hop)
        spec = np.fft.rfft(windows * window, n=fft_size, axis=-1)
        pred_mag = np.abs(spec)
        target_mag = stft_mag(target, fft_size, hop, window_len)

        sc, log_l1, diff, diff_norm, target_norm, lp, lt = _resolution_loss(
            pred_mag, target_mag)
        total += sc + log_l1
        if not want_grad:
            continue

        dmag = _resolution_grad(pred_mag, diff, diff_norm, target_norm, lp, lt)
        # d|X|/dX pulls the gradient back onto the complex spectrum
        safe = np.where(pred_mag == 0.0, 1.0, pred_mag)
        dspec = dmag * (spec / safe)
        # adjoint of rfft on real input: half-weight interior bins; the
        # zero-padding to fft_size reverses as a crop to window_len
        weights = np.full(fft_size // 2 + 1, 0.5)
        weights[0] = 1.0
        weights[-1] = 1.0
        dframes = fft_size * np.fft.irfft(dspec * weights, fft_size, axis=-1)
        dframes = dframes[:, :window_len] * window
        grad += _overlap_add_adjoint(dframes, n, window_len, hop, left, right)

    scale = 1.0 / len(usable)
    if want_grad:
        return total * scale, grad * scale
    return total * scale, None
