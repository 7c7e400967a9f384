"""Pure-numpy fallback for the band-mixing kernels.

Mirrors the compiled extension's block partition and pairwise reduction so
results are deterministic here too (bitwise-stable per backend; the two
backends agree to float tolerance, not bit-for-bit).
"""

import numpy as np

BAND_BLOCK = 64
TILE_FRAMES = 2048


def _loop_indices(start: int, count: int, period: int) -> np.ndarray:
    return (start + np.arange(count, dtype=np.int64)) % period


def mix_render(amps, bands, shift, sample_offset=0, window=32, next_frame=None,
               num_threads=0):
    m_bands, t_frames = amps.shape
    period = bands.shape[1]
    w = window
    n_out = t_frames * w
    nblocks = (m_bands + BAND_BLOCK - 1) // BAND_BLOCK

    a_last = np.asarray(next_frame, dtype=np.float64) if next_frame is not None \
        else amps[:, -1]
    a_next = np.empty_like(amps)
    a_next[:, :-1] = amps[:, 1:]
    a_next[:, -1] = a_last
    # same interpolation arithmetic as the compiled kernel: a0 + step*w
    step = (a_next - amps) * (1.0 / w)
    warr = np.arange(w, dtype=np.float64)

    out = np.zeros(n_out, dtype=np.float64)
    for t0 in range(0, t_frames, TILE_FRAMES):
        t1 = min(t0 + TILE_FRAMES, t_frames)
        tile_samp = (t1 - t0) * w
        idx = _loop_indices(t0 * w + shift + sample_offset, tile_samp, period)
        partial = np.zeros((nblocks, tile_samp), dtype=np.float64)
        for b in range(nblocks):
            sel = slice(b * BAND_BLOCK, min((b + 1) * BAND_BLOCK, m_bands))
            seg = np.take(bands[sel], idx, axis=1).astype(np.float64)
            up = amps[sel, t0:t1, None] + step[sel, t0:t1, None] * warr
            partial[b] = np.einsum("mn,mn->n", up.reshape(seg.shape), seg)
        stride = 1
        while stride < nblocks:
            for i in range(0, nblocks - stride, 2 * stride):
                partial[i] += partial[i + stride]
            stride *= 2
        out[t0 * w:t0 * w + tile_samp] = partial[0]
    return out


def mix_adjoint(grad_out, bands, shift, sample_offset=0, window=32, num_threads=0):
    m_bands, period = bands.shape
    w = window
    t_frames = grad_out.shape[0] // w
    frac = np.arange(w, dtype=np.float64) / w

    dA = np.zeros((m_bands, t_frames), dtype=np.float64)
    for t0 in range(0, t_frames, TILE_FRAMES):
        t1 = min(t0 + TILE_FRAMES, t_frames)
        tile_samp = (t1 - t0) * w
        idx = _loop_indices(t0 * w + shift + sample_offset, tile_samp, period)
        g = grad_out[t0 * w:t0 * w + tile_samp]
        for b in range(0, m_bands, BAND_BLOCK):
            sel = slice(b, min(b + BAND_BLOCK, m_bands))
            q = np.take(bands[sel], idx, axis=1).astype(np.float64) * g
            q3 = q.reshape(q.shape[0], t1 - t0, w)
            acc0 = q3 @ (1.0 - frac)
            acc1 = q3 @ frac
            dA[sel, t0:t1] += acc0
            if t1 < t_frames:
                dA[sel, t0 + 1:t1 + 1] += acc1
            else:
                if t1 - t0 > 1:
                    dA[sel, t0 + 1:t1] += acc1[:, :-1]
                dA[sel, t_frames - 1] += acc1[:, -1]
    return dA


def max_threads():
    return 1
