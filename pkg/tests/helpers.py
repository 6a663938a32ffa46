"""Shared test signal builders and the finite-difference gradient oracle."""

from __future__ import annotations

import numpy as np

from ddsp_voxkit.audio_io import AudioBuffer
from ddsp_voxkit.autodiff import Tape

SR = 16000


def sine_buffer(freq: float, seconds: float = 1.0, amp: float = 0.5, sr: int = SR) -> AudioBuffer:
    t = np.arange(int(seconds * sr)) / sr
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), sr)


def sawtooth_buffer(freq: float, seconds: float = 1.0, amp: float = 0.4, sr: int = SR) -> AudioBuffer:
    """Band-limited sawtooth: harmonics up to 0.45*sr with 1/k amplitudes."""
    t = np.arange(int(seconds * sr)) / sr
    x = np.zeros_like(t)
    k = 1
    while k * freq < 0.45 * sr:
        x += np.sin(2 * np.pi * k * freq * t) / k
        k += 1
    x *= amp / np.max(np.abs(x))
    return AudioBuffer(x, sr)


def noise_buffer(seconds: float = 1.0, amp: float = 0.3, seed: int = 0, sr: int = SR) -> AudioBuffer:
    rng = np.random.default_rng(seed)
    return AudioBuffer(amp * rng.uniform(-1.0, 1.0, int(seconds * sr)), sr)


# --- deterministic formant-synthesized utterance -------------------------
#
# Source-filter synthesis (impulse-train glottal source with spectral tilt,
# cascade formant resonators, shaped noise for fricatives). Deliberately a
# different synthesis family from the harmonic+noise model under test, so
# analysis-synthesis experiments run against an independent signal.

_VOWELS = {
    "a": ((800.0, 1150.0, 2800.0, 3500.0), 1.0),
    "i": ((280.0, 2250.0, 2900.0, 3500.0), 0.8),
    "u": ((310.0, 870.0, 2250.0, 3500.0), 0.9),
    "e": ((480.0, 1900.0, 2500.0, 3500.0), 0.9),
}
_BANDWIDTHS = (90.0, 110.0, 170.0, 250.0)


def _resonator(x: np.ndarray, freq: float, bw: float, sr: int) -> np.ndarray:
    r = np.exp(-np.pi * bw / sr)
    theta = 2.0 * np.pi * freq / sr
    a1 = 2.0 * r * np.cos(theta)
    a2 = -r * r
    gain = 1.0 - a1 - a2  # unity at DC-ish; rescaled later anyway
    y = np.empty_like(x)
    y1 = y2 = 0.0
    for n in range(len(x)):
        y0 = gain * x[n] + a1 * y1 + a2 * y2
        y[n] = y0
        y2, y1 = y1, y0
    return y


def _vowel_segment(n: int, f0_start: float, f0_end: float, vowel: str, sr: int) -> np.ndarray:
    f0 = np.linspace(f0_start, f0_end, n)
    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    # impulse train: one pulse per cycle wrap
    cycles = np.floor(phase / (2.0 * np.pi))
    pulses = np.zeros(n)
    pulses[1:] = (cycles[1:] > cycles[:-1]).astype(np.float64)
    # glottal tilt: two leaky integrators (-12 dB/oct)
    src = pulses
    for _ in range(2):
        out = np.empty_like(src)
        acc = 0.0
        for i in range(len(src)):
            acc = 0.97 * acc + src[i]
            out[i] = acc
        src = out
    src = np.diff(src, prepend=0.0)  # radiation (+6 dB/oct)
    formants, level = _VOWELS[vowel]
    y = src
    for freq, bw in zip(formants, _BANDWIDTHS):
        y = _resonator(y, freq, bw, sr)
    return level * y / (np.max(np.abs(y)) + 1e-12)


def _fricative_segment(n: int, rng: np.random.Generator, center: float, sr: int) -> np.ndarray:
    noise = rng.normal(size=n)
    noise = np.diff(noise, prepend=0.0)  # high-pass tilt
    y = _resonator(noise, center, 900.0, sr)
    return 0.25 * y / (np.max(np.abs(y)) + 1e-12)


def _edge_envelope(n: int, edge: int) -> np.ndarray:
    env = np.ones(n)
    e = min(edge, n // 2)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(e) / e)
    env[:e] = ramp
    env[-e:] = ramp[::-1]
    return env


def formant_speech(seed: int = 1234, sr: int = SR) -> AudioBuffer:
    """~2.8 s of clean synthetic speech: vowels, fricatives, and pauses."""
    rng = np.random.default_rng(seed)
    plan = [
        ("a", 0.45, 185.0, 168.0),
        ("i", 0.35, 172.0, 155.0),
        ("s", 0.22, 0.0, 0.0),
        ("u", 0.40, 160.0, 144.0),
        ("", 0.12, 0.0, 0.0),
        ("e", 0.42, 152.0, 136.0),
        ("a", 0.38, 142.0, 122.0),
        ("s", 0.18, 0.0, 0.0),
        ("", 0.10, 0.0, 0.0),
    ]
    pieces = []
    for kind, dur, f0a, f0b in plan:
        n = int(dur * sr)
        if kind == "":
            seg = np.zeros(n)
        elif kind == "s":
            seg = _fricative_segment(n, rng, center=5200.0, sr=sr)
            seg *= _edge_envelope(n, int(0.012 * sr))
        else:
            seg = _vowel_segment(n, f0a, f0b, kind, sr)
            seg *= _edge_envelope(n, int(0.015 * sr))
        pieces.append(seg)
    x = np.concatenate(pieces)
    x = 0.6 * x / np.max(np.abs(x))
    return AudioBuffer(x, sr)


# --- finite-difference oracle --------------------------------------------


def numeric_gradient(
    build, x0: np.ndarray, h: float = 1e-5, coords=None
) -> np.ndarray:
    """Central differences of the scalar loss defined by build(tape, leaf).

    `coords` restricts evaluation to the given multi-indices (entries left
    at 0 compare as skipped); by default every coordinate is probed.
    """
    gf = np.zeros_like(x0, dtype=np.float64)
    if coords is None:
        it = np.nditer(x0, flags=["multi_index"])
        coords = []
        while not it.finished:
            coords.append(it.multi_index)
            it.iternext()
    for i in coords:
        i = tuple(np.atleast_1d(i)) if not isinstance(i, tuple) else i
        xp = x0.copy()
        xp[i] += h
        xm = x0.copy()
        xm[i] -= h
        tp = Tape(np.float64)
        tm = Tape(np.float64)
        lp = build(tp, tp.leaf(xp))
        lm = build(tm, tm.leaf(xm))
        gf[i] = (float(lp.data) - float(lm.data)) / (2.0 * h)
    return gf


def analytic_gradient(build, x0: np.ndarray) -> np.ndarray:
    tape = Tape(np.float64)
    x = tape.leaf(x0, trainable=True, name="x")
    loss = build(tape, x)
    return tape.backward(loss)["x"]


def max_rel_error(g: np.ndarray, gf: np.ndarray, floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(g), np.abs(gf)), floor)
    return float((np.abs(g - gf) / denom).max())


def gradcheck(build, x0: np.ndarray, rtol: float = 1e-4, h: float = 1e-5,
              mask: np.ndarray | None = None) -> float:
    """Assert analytic vs numeric gradients agree; returns the max rel error.

    `mask` marks coordinates to skip (within h of a nondifferentiable point).
    """
    g = analytic_gradient(build, x0)
    gf = numeric_gradient(build, x0, h)
    if mask is not None:
        keep = ~mask
        g = g[keep]
        gf = gf[keep]
    err = max_rel_error(g, gf)
    assert err < rtol, f"gradient mismatch: max rel error {err:.3e} >= {rtol}"
    return err
