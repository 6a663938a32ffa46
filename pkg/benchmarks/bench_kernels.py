#!/usr/bin/env python3
"""Benchmark the pure-numpy kernels against the compiled core.

Covers the dispatched loop kernels (nccf, ola, interp) at the shapes the
pipeline actually uses, the conv1d im2col+BLAS kernel that deliberately
has no compiled mirror, and one full training step per backend.

Run:  python benchmarks/bench_kernels.py
"""

import os
import time

import numpy as np

from ddsp_voxkit.kernels import pure

try:
    from ddsp_voxkit.kernels import _core as compiled
except ImportError:
    compiled = None


def timeit(fn, *args, reps=20, warmup=2):
    for _ in range(warmup):
        fn(*args)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps * 1e3


def row(name, pure_ms, compiled_ms):
    if compiled_ms is None:
        print(f"{name:34s} {pure_ms:9.3f} ms {'-':>12s} {'-':>9s}")
    else:
        speedup = pure_ms / compiled_ms
        print(f"{name:34s} {pure_ms:9.3f} ms {compiled_ms:9.3f} ms {speedup:8.1f}x")


def bench_kernels():
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'pure':>12s} {'compiled':>12s} {'speedup':>9s}")

    # nccf at 3 s of 16 kHz audio: 280 frames x 291 lags x 640-sample window
    x = rng.normal(size=49000)
    starts = (160 * np.arange(280)).astype(np.int64)
    lags = np.arange(30, 321, dtype=np.int64)
    row(
        "nccf (280 frames, 291 lags)",
        timeit(pure.nccf, x, starts, lags, 640, reps=3),
        timeit(compiled.nccf, x, starts, lags, 640) if compiled else None,
    )

    # overlap-add at the noise-branch geometry (fft 1024, hop 160)
    frames = rng.normal(size=(100, 1024))
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(1024) / 1024)
    out_len = 100 * 160
    row(
        "ola (100 frames, fft 1024)",
        timeit(pure.ola, frames, window, 160, out_len),
        timeit(compiled.ola, frames, window, 160, out_len) if compiled else None,
    )
    g = rng.normal(size=out_len)
    row(
        "ola_adjoint",
        timeit(pure.ola_adjoint, g, window, 160, 100, 1024),
        timeit(compiled.ola_adjoint, g, window, 160, 100, 1024) if compiled else None,
    )

    # interpolation scatter at harmonic-distribution shape (frames x 32)
    n_frames, factor = 100, 160
    n_samples = n_frames * factor
    idx0 = np.minimum((np.arange(n_samples) // factor), n_frames - 2).astype(np.int64)
    idx1 = idx0 + 1
    w = rng.uniform(0, 1, n_samples)
    vals = rng.normal(size=(n_frames, 32))
    gs = rng.normal(size=(n_samples, 32))
    row(
        "interp_gather (16k samples x 32)",
        timeit(pure.interp_gather, vals, idx0, idx1, w),
        timeit(compiled.interp_gather, vals, idx0, idx1, w) if compiled else None,
    )
    row(
        "interp_scatter",
        timeit(pure.interp_scatter, gs, idx0, idx1, w, n_frames),
        timeit(compiled.interp_scatter, gs, idx0, idx1, w, n_frames) if compiled else None,
    )

    # conv1d: no compiled mirror on purpose; im2col + BLAS wins here
    xc = rng.normal(size=(37, 256))
    wc = rng.normal(size=(256, 256, 3))
    bc = rng.normal(size=256)
    gy = rng.normal(size=(37, 256))
    row("conv1d fwd (37x256, BLAS form)", timeit(pure.conv1d_fwd, xc, wc, bc), None)
    row("conv1d bwd", timeit(pure.conv1d_bwd, xc, wc, gy), None)


def bench_fit_step():
    from ddsp_voxkit.fit import FitConfig, fit_utterance
    from ddsp_voxkit.pitch import F0Contour
    from ddsp_voxkit.synth import SynthParams, synth_dsp

    m = 60
    contour = F0Contour(np.linspace(150, 200, m), np.ones(m, dtype=bool))
    params = SynthParams(
        np.full(m, 0.4),
        np.full((m, 32), 1.0 / 32),
        np.full((m, 513), 0.01),
    )
    target = synth_dsp(params, contour, seed=0)
    cfg = FitConfig(steps=25, seed=0, slice_frames=0)
    t0 = time.perf_counter()
    fit_utterance(target, cfg, dtype=np.float64)
    ms = (time.perf_counter() - t0) / cfg.steps * 1e3
    backend = "pure" if os.environ.get("DDSP_VOXKIT_PURE") else "compiled-if-built"
    print(f"\nfull fit step ({m} frames, float64, kernels={backend}): {ms:.1f} ms")


if __name__ == "__main__":
    if compiled is None:
        print("compiled core not built; showing pure backend only\n")
    bench_kernels()
    bench_fit_step()
    print(
        "\nre-run with DDSP_VOXKIT_PURE=1 to time the full step on the"
        " pure backend"
    )
