# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled band-mixing kernels.

The mixing loop (per-band linear-interpolated amplitude times looping noise
band, summed over all bands) dominates synthesis and training time. Bands are
partitioned into fixed 64-band blocks; each block accumulates into a private
float64 buffer and the block buffers are reduced in a pairwise tree, so the
output is bit-identical regardless of thread count.
"""

import numpy as np

cimport openmp
from cython.parallel cimport prange

cdef Py_ssize_t BAND_BLOCK = 64
cdef Py_ssize_t TILE_FRAMES = 2048


cdef inline void _band_mix(double* dst, const double* amps_row, const float* band,
                           Py_ssize_t L, Py_ssize_t t0, Py_ssize_t t1, Py_ssize_t T,
                           int W, long long base, double a_last) noexcept nogil:
    cdef Py_ssize_t t, k = 0
    cdef long long idx = base
    cdef int w
    cdef double a0, a1, step, invw = 1.0 / W
    for t in range(t0, t1):
        a0 = amps_row[t]
        a1 = amps_row[t + 1] if t + 1 < T else a_last
        step = (a1 - a0) * invw
        for w in range(W):
            dst[k] += (a0 + step * w) * band[idx]
            k += 1
            idx += 1
            if idx == L:
                idx = 0


def mix_render(double[:, ::1] amps, const float[:, ::1] bands, long long shift,
               long long sample_offset=0, int window=32, next_frame=None,
               int num_threads=0):
    """Sum of per-band (interpolated amplitude x looping band) over all bands.

    amps is (M, T) at the internal rate; output is T*window samples. Frame t
    anchors sample t*window; the last frame interpolates toward next_frame
    when given (streamed chunks) and holds its value otherwise.
    """
    cdef Py_ssize_t M = amps.shape[0], T = amps.shape[1], L = bands.shape[1]
    cdef int W = window
    cdef Py_ssize_t N = T * W
    cdef Py_ssize_t nblocks = (M + BAND_BLOCK - 1) // BAND_BLOCK

    out_arr = np.zeros(N, dtype=np.float64)
    cdef double[::1] out = out_arr

    last_arr = np.asarray(next_frame, dtype=np.float64) if next_frame is not None \
        else np.ascontiguousarray(amps[:, T - 1])
    cdef double[::1] a_last = last_arr

    cdef Py_ssize_t tile = TILE_FRAMES if T > TILE_FRAMES else T
    partial_arr = np.zeros((nblocks, tile * W), dtype=np.float64)
    cdef double[:, ::1] partial = partial_arr

    cdef int nt = num_threads if num_threads > 0 else openmp.omp_get_max_threads()
    cdef Py_ssize_t t0, t1, b, m, mhi, tile_samp, stride, i
    cdef long long base

    t0 = 0
    while t0 < T:
        t1 = t0 + TILE_FRAMES
        if t1 > T:
            t1 = T
        tile_samp = (t1 - t0) * W
        partial_arr[:] = 0.0
        base = (t0 * W + shift + sample_offset) % L
        for b in prange(nblocks, nogil=True, num_threads=nt, schedule='static'):
            mhi = (b + 1) * BAND_BLOCK
            if mhi > M:
                mhi = M
            for m in range(b * BAND_BLOCK, mhi):
                _band_mix(&partial[b, 0], &amps[m, 0], &bands[m, 0],
                          L, t0, t1, T, W, base, a_last[m])
        # pairwise tree reduction: deterministic, independent of thread count
        stride = 1
        while stride < nblocks:
            i = 0
            while i + stride < nblocks:
                partial_arr[i, :tile_samp] += partial_arr[i + stride, :tile_samp]
                i += 2 * stride
            stride *= 2
        out_arr[t0 * W:t0 * W + tile_samp] = partial_arr[0, :tile_samp]
        t0 = t1
    return out_arr


def mix_adjoint(double[::1] grad_out, const float[:, ::1] bands, long long shift,
                long long sample_offset=0, int window=32, int num_threads=0):
    """Adjoint of mix_render w.r.t. the amplitude frame matrix.

    grad_out has T*window samples; returns (M, T) float64. Uses hold-last
    semantics (training renders whole chunks, never bridged ones).
    """
    cdef Py_ssize_t M = bands.shape[0], L = bands.shape[1]
    cdef int W = window
    cdef Py_ssize_t N = grad_out.shape[0]
    cdef Py_ssize_t T = N // W

    dA_arr = np.zeros((M, T), dtype=np.float64)
    cdef double[:, ::1] dA = dA_arr

    cdef int nt = num_threads if num_threads > 0 else openmp.omp_get_max_threads()
    cdef Py_ssize_t m, t
    cdef int w
    cdef long long start = (shift + sample_offset) % L, idx
    cdef double q, f, acc0, acc1, invw = 1.0 / W

    for m in prange(M, nogil=True, num_threads=nt, schedule='static'):
        idx = start
        for t in range(T):
            acc0 = 0.0
            acc1 = 0.0
            for w in range(W):
                q = grad_out[t * W + w] * bands[m, idx]
                idx = idx + 1
                if idx == L:
                    idx = 0
                f = w * invw
                acc0 = acc0 + q * (1.0 - f)
                acc1 = acc1 + q * f
            if t < T - 1:
                dA[m, t] += acc0
                dA[m, t + 1] += acc1
            else:
                dA[m, t] += acc0 + acc1
    return dA_arr


def max_threads():
    return openmp.omp_get_max_threads()
