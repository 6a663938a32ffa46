# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled mirrors of the loop-shaped kernels in ddsp_voxkit.kernels.pure.

Same signatures and semantics; the tight lag scans and scatter loops here
are the ones numpy cannot express without per-frame Python overhead.
conv1d stays in the pure module: its im2col + BLAS form wins at these
channel counts.
"""

import numpy as np

cimport cython
from libc.math cimport sqrt

ctypedef fused floating:
    float
    double


def nccf(x, starts, lags, win):
    x = np.ascontiguousarray(x, dtype=np.float64)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    lags = np.ascontiguousarray(lags, dtype=np.int64)
    out = np.zeros((len(starts), len(lags)), dtype=np.float64)
    _nccf(x, starts, lags, int(win), out)
    return out


def ola(frames, window, hop, out_len):
    frames = np.ascontiguousarray(frames)
    window = np.ascontiguousarray(window, dtype=frames.dtype)
    y = np.zeros(out_len, dtype=frames.dtype)
    if frames.dtype == np.float32:
        _ola[float](frames, window, int(hop), y)
    else:
        _ola[double](frames, window, int(hop), y)
    return y


def ola_adjoint(g, window, hop, n_frames, frame_len):
    g = np.ascontiguousarray(g)
    window = np.ascontiguousarray(window, dtype=g.dtype)
    gf = np.zeros((n_frames, frame_len), dtype=g.dtype)
    if g.dtype == np.float32:
        _ola_adjoint[float](g, window, int(hop), gf)
    else:
        _ola_adjoint[double](g, window, int(hop), gf)
    return gf


def interp_gather(vals, idx0, idx1, w):
    vals = np.ascontiguousarray(vals)
    idx0 = np.ascontiguousarray(idx0, dtype=np.int64)
    idx1 = np.ascontiguousarray(idx1, dtype=np.int64)
    w = np.ascontiguousarray(w, dtype=vals.dtype)
    out = np.empty((len(idx0), vals.shape[1]), dtype=vals.dtype)
    if vals.dtype == np.float32:
        _interp_gather[float](vals, idx0, idx1, w, out)
    else:
        _interp_gather[double](vals, idx0, idx1, w, out)
    return out


def interp_scatter(g, idx0, idx1, w, n_in):
    g = np.ascontiguousarray(g)
    idx0 = np.ascontiguousarray(idx0, dtype=np.int64)
    idx1 = np.ascontiguousarray(idx1, dtype=np.int64)
    w = np.ascontiguousarray(w, dtype=g.dtype)
    out = np.zeros((n_in, g.shape[1]), dtype=g.dtype)
    if g.dtype == np.float32:
        _interp_scatter[float](g, idx0, idx1, w, out)
    else:
        _interp_scatter[double](g, idx0, idx1, w, out)
    return out


cdef void _nccf(double[::1] x, long long[::1] starts, long long[::1] lags,
                int win, double[:, ::1] out) noexcept:
    cdef Py_ssize_t m = starts.shape[0], nl = lags.shape[0]
    cdef Py_ssize_t i, j, n
    cdef long long s, lag
    cdef double ea, ec, dot
    for i in range(m):
        s = starts[i]
        ea = 0.0
        for n in range(win):
            ea += x[s + n] * x[s + n]
        if ea <= 0.0:
            continue
        for j in range(nl):
            lag = lags[j]
            ec = 0.0
            dot = 0.0
            for n in range(win):
                ec += x[s + lag + n] * x[s + lag + n]
                dot += x[s + n] * x[s + lag + n]
            if ec <= 0.0:
                continue
            out[i, j] = dot / sqrt(ea * ec)


cdef void _ola(floating[:, ::1] frames, floating[::1] window,
               int hop, floating[::1] y) noexcept:
    cdef Py_ssize_t m = frames.shape[0], n = frames.shape[1]
    cdef Py_ssize_t out_len = y.shape[0]
    cdef Py_ssize_t t, j, s, stop
    for t in range(m):
        s = t * hop
        if s >= out_len:
            break
        stop = n if s + n <= out_len else out_len - s
        for j in range(stop):
            y[s + j] += window[j] * frames[t, j]


cdef void _ola_adjoint(floating[::1] g, floating[::1] window,
                       int hop, floating[:, ::1] gf) noexcept:
    cdef Py_ssize_t m = gf.shape[0], n = gf.shape[1]
    cdef Py_ssize_t out_len = g.shape[0]
    cdef Py_ssize_t t, j, s, stop
    for t in range(m):
        s = t * hop
        if s >= out_len:
            break
        stop = n if s + n <= out_len else out_len - s
        for j in range(stop):
            gf[t, j] = window[j] * g[s + j]


cdef void _interp_gather(floating[:, ::1] vals, long long[::1] idx0,
                         long long[::1] idx1, floating[::1] w,
                         floating[:, ::1] out) noexcept:
    cdef Py_ssize_t s_len = idx0.shape[0], d = vals.shape[1]
    cdef Py_ssize_t s, j
    cdef long long i0, i1
    cdef floating ws, wc
    for s in range(s_len):
        i0 = idx0[s]
        i1 = idx1[s]
        ws = w[s]
        wc = <floating>1.0 - ws
        for j in range(d):
            out[s, j] = wc * vals[i0, j] + ws * vals[i1, j]


cdef void _interp_scatter(floating[:, ::1] g, long long[::1] idx0,
                          long long[::1] idx1, floating[::1] w,
                          floating[:, ::1] out) noexcept:
    cdef Py_ssize_t s_len = idx0.shape[0], d = g.shape[1]
    cdef Py_ssize_t s, j
    cdef long long i0, i1
    cdef floating ws, wc
    for s in range(s_len):
        i0 = idx0[s]
        i1 = idx1[s]
        ws = w[s]
        wc = <floating>1.0 - ws
        for j in range(d):
            out[i0, j] += wc * g[s, j]
            out[i1, j] += ws * g[s, j]
