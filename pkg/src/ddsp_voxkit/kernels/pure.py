"""Pure numpy implementations of the inner-loop kernels.

These define the semantics. The compiled core (_core.pyx) mirrors the
loop-shaped kernels (nccf, ola, interp scatter/gather) where tight C loops
beat vectorized numpy; conv1d intentionally has no compiled mirror because
its im2col + BLAS formulation below is already the fastest option at the
channel counts this package uses (see benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import numpy as np


def conv1d_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 1-D convolution over the frame axis.

    x: (T, Cin), w: (Cout, Cin, K) with K odd, b: (Cout,) -> (T, Cout)
    """
    t, cin = x.shape
    cout, _, k = w.shape
    pad = k // 2
    xp = np.zeros((t + 2 * pad, cin), dtype=x.dtype)
    xp[pad : pad + t] = x
    cols = np.empty((t, k * cin), dtype=x.dtype)
    for j in range(k):
        cols[:, j * cin : (j + 1) * cin] = xp[j : j + t]
    w2 = w.transpose(2, 1, 0).reshape(k * cin, cout)
    return cols @ w2 + b


def conv1d_bwd(
    x: np.ndarray, w: np.ndarray, gy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv1d_fwd w.r.t. (x, w, b) given upstream gy (T, Cout)."""
    t, cin = x.shape
    cout, _, k = w.shape
    pad = k // 2
    xp = np.zeros((t + 2 * pad, cin), dtype=x.dtype)
    xp[pad : pad + t] = x
    cols = np.empty((t, k * cin), dtype=x.dtype)
    for j in range(k):
        cols[:, j * cin : (j + 1) * cin] = xp[j : j + t]
    w2 = w.transpose(2, 1, 0).reshape(k * cin, cout)

    gb = gy.sum(axis=0)
    gw2 = cols.T @ gy                       # (K*Cin, Cout)
    gw = gw2.reshape(k, cin, cout).transpose(2, 1, 0).copy()
    gcols = gy @ w2.T                       # (T, K*Cin)
    gxp = np.zeros_like(xp)
    for j in range(k):
        gxp[j : j + t] += gcols[:, j * cin : (j + 1) * cin]
    return gxp[pad : pad + t].copy(), gw, gb


def nccf(
    x: np.ndarray, starts: np.ndarray, lags: np.ndarray, win: int
) -> np.ndarray:
    """Normalized cross-correlation per frame over a set of lags.

    x: (N,) float64, already zero-padded by the caller so that
    x[start : start + win + max(lag)] is always in range.
    starts: (M,) int64 window start per frame; lags: (L,) int64.
    Returns (M, L) with 0 where either windowed energy vanishes.
    """
    m = len(starts)
    nl = len(lags)
    out = np.zeros((m, nl), dtype=np.float64)
    for i in range(m):
        s = int(starts[i])
        a = x[s : s + win]
        ea = float(a @ a)
        if ea <= 0.0:
            continue
        for j in range(nl):
            lag = int(lags[j])
            c = x[s + lag : s + lag + win]
            ec = float(c @ c)
            if ec <= 0.0:
                continue
            out[i, j] = float(a @ c) / np.sqrt(ea * ec)
    return out


def ola(frames: np.ndarray, window: np.ndarray, hop: int, out_len: int) -> np.ndarray:
    """Windowed overlap-add: y[t*hop + n] += window[n] * frames[t, n]."""
    m, n = frames.shape
    y = np.zeros(out_len, dtype=frames.dtype)
    for ti in range(m):
        s = ti * hop
        if s >= out_len:
            break
        e = min(s + n, out_len)
        y[s:e] += window[: e - s] * frames[ti, : e - s]
    return y


def ola_adjoint(
    g: np.ndarray, window: np.ndarray, hop: int, n_frames: int, frame_len: int
) -> np.ndarray:
    """Adjoint of ola: gframes[t, n] = window[n] * g[t*hop + n] (zero past end)."""
    out_len = len(g)
    gf = np.zeros((n_frames, frame_len), dtype=g.dtype)
    for ti in range(n_frames):
        s = ti * hop
        if s >= out_len:
            break
        e = min(s + frame_len, out_len)
        gf[ti, : e - s] = window[: e - s] * g[s:e]
    return gf


def interp_gather(
    vals: np.ndarray, idx0: np.ndarray, idx1: np.ndarray, w: np.ndarray
) -> np.ndarray:
    """out[s] = (1-w[s]) * vals[idx0[s]] + w[s] * vals[idx1[s]]; vals is (T, D)."""
    ww = w[:, None]
    return (1.0 - ww) * vals[idx0] + ww * vals[idx1]


def interp_scatter(
    g: np.ndarray, idx0: np.ndarray, idx1: np.ndarray, w: np.ndarray, n_in: int
) -> np.ndarray:
    """Adjoint of interp_gather: accumulate sample grads back onto frames."""
    out = np.zeros((n_in, g.shape[1]), dtype=g.dtype)
    ww = w[:, None]
    np.add.at(out, idx0, (1.0 - ww) * g)
    np.add.at(out, idx1, ww * g)
    return out
