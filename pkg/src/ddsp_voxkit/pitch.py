"""Fundamental-frequency tracking on the shared 100 Hz frame grid.

A RAPT-style tracker, deliberately simplified: per frame the normalized
cross-correlation function (NCCF) is scanned over the lag range covering
50-550 Hz with a 40 ms window centered on the frame, local maxima above a
fixed threshold become voiced candidates (with parabolic lag refinement),
and a Viterbi pass over candidates plus an explicit unvoiced state picks
the contour. Transitions pay |log2(f/f_prev)| for pitch jumps and a flat
0.2 to flip voicing. Frame centers follow the synthesis interpolation
grid, sample (t + 0.5) * hop, so extracted values drive the oscillator at
the position where they were measured.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .features import HOP_SIZE, frame_count
from .kernels import nccf as nccf_kernel

F0_MIN = 50.0
F0_MAX = 550.0
NCCF_THRESHOLD = 0.3
VOICING_SWITCH_COST = 0.2
CORR_WIN_MS = 40.0

# Small lag-proportional penalty so that among equal correlation peaks the
# shortest lag (highest f0) wins; this is what keeps a strongly harmonic
# signal from locking onto its double period.
_LAG_BIAS = 0.05
_MAX_CANDIDATES = 8


@dataclass(frozen=True)
class F0Contour:
    """Per-frame f0 in Hz (0 exactly on unvoiced frames) plus voicing flags."""

    f0_hz: np.ndarray
    voiced: np.ndarray
    frame_rate: float = 100.0

    def __post_init__(self):
        f0 = np.asarray(self.f0_hz, dtype=np.float64)
        v = np.asarray(self.voiced, dtype=bool)
        if f0.shape != v.shape or f0.ndim != 1:
            raise ValueError("f0_hz and voiced must be equal-length vectors")
        if np.any((f0 == 0) != ~v):
            raise ValueError("f0 must be zero exactly on unvoiced frames")
        object.__setattr__(self, "f0_hz", f0)
        object.__setattr__(self, "voiced", v)

    @property
    def frames(self) -> int:
        return len(self.f0_hz)


def _candidates(row: np.ndarray, lags: np.ndarray, sr: int):
    """Voiced (f0, nccf) candidates: refined local maxima above threshold."""
    out = []
    for j in range(len(row)):
        v = row[j]
        if v <= NCCF_THRESHOLD:
            continue
        left = row[j - 1] if j > 0 else -np.inf
        right = row[j + 1] if j < len(row) - 1 else -np.inf
        if v < left or v <= right:
            continue
        lag = float(lags[j])
        value = v
        if 0 < j < len(row) - 1:
            denom = row[j - 1] - 2.0 * v + row[j + 1]
            if denom < 0:
                delta = 0.5 * (row[j - 1] - row[j + 1]) / denom
                delta = float(np.clip(delta, -0.5, 0.5))
                lag += delta
                value = v - 0.25 * (row[j - 1] - row[j + 1]) * delta
        f0 = float(np.clip(sr / lag, F0_MIN, F0_MAX))
        out.append((f0, min(value, 1.0), lag))
    out.sort(key=lambda c: -c[1])
    return out[:_MAX_CANDIDATES]


def extract_f0(audio: AudioBuffer, frame_rate: float = 100.0) -> F0Contour:
    """Track f0 over the same frames as log_mel for the same audio."""
    sr = audio.sample_rate
    if sr != 16000:
        raise ValueError("extract_f0 expects 16 kHz input")
    hop = int(round(sr / frame_rate))
    if hop != HOP_SIZE:
        raise ValueError("only the 100 Hz frame grid is supported")

    corr_win = int(sr * CORR_WIN_MS / 1000.0)  # 640
    m = frame_count(len(audio), win=640, hop=hop)
    if len(audio) < corr_win:
        return F0Contour(np.zeros(m), np.zeros(m, dtype=bool))

    lag_min = int(np.ceil(sr / F0_MAX))
    lag_max = int(np.floor(sr / F0_MIN))
    lags = np.arange(lag_min, lag_max + 1, dtype=np.int64)

    # correlation windows are centered where interpolate_f0_to_samples will
    # place the frame value, sample (t + 0.5) * hop; pad both ends so every
    # window plus maximal lag stays in range
    lead = corr_win // 2 - hop // 2
    x = np.concatenate(
        [np.zeros(lead), audio.samples, np.zeros(corr_win + lag_max)]
    )
    starts = (hop * np.arange(m)).astype(np.int64)
    scores = nccf_kernel(np.ascontiguousarray(x), starts, lags, corr_win)

    frame_cands = [_candidates(scores[t], lags, sr) for t in range(m)]

    # Viterbi over [unvoiced] + candidates per frame
    unvoiced_cost = 1.0 - NCCF_THRESHOLD
    prev_cost = None
    prev_f0 = None
    back = []
    for t in range(m):
        cands = frame_cands[t]
        f0s = [0.0] + [c[0] for c in cands]
        local = [unvoiced_cost] + [
            (1.0 - c[1]) + _LAG_BIAS * (c[2] / lag_max) for c in cands
        ]
        if prev_cost is None:
            prev_cost = np.array(local)
            prev_f0 = np.array(f0s)
            back.append(np.full(len(f0s), -1, dtype=np.int64))
            continue
        cost = np.empty(len(f0s))
        choice = np.empty(len(f0s), dtype=np.int64)
        for i, f in enumerate(f0s):
            if f == 0.0:
                trans = np.where(prev_f0 == 0.0, 0.0, VOICING_SWITCH_COST)
            else:
                trans = np.where(
                    prev_f0 == 0.0,
                    VOICING_SWITCH_COST,
                    np.abs(np.log2(f / np.where(prev_f0 == 0.0, 1.0, prev_f0))),
                )
            total = prev_cost + trans
            j = int(np.argmin(total))
            cost[i] = total[j] + local[i]
            choice[i] = j
        prev_cost = cost
        prev_f0 = np.array(f0s)
        back.append(choice)

    f0_out = np.zeros(m)
    state = int(np.argmin(prev_cost))
    for t in range(m - 1, -1, -1):
        cands = frame_cands[t]
        f0_out[t] = 0.0 if state == 0 else cands[state - 1][0]
        state = int(back[t][state])
    return F0Contour(f0_out, f0_out > 0.0)


def lf0(contour: F0Contour) -> np.ndarray:
    """Natural log of f0 on voiced frames, 0 elsewhere."""
    out = np.zeros(contour.frames)
    out[contour.voiced] = np.log(contour.f0_hz[contour.voiced])
    return out


def interpolate_f0_to_samples(contour: F0Contour, hop: int = HOP_SIZE) -> np.ndarray:
    """Per-sample f0 by linear interpolation between voiced frame centers.

    Frame t's center sits at sample t*hop + hop/2. Interpolation never
    bridges a voicing boundary: samples owned by unvoiced frames are 0 and
    voiced runs clamp to their own endpoints.
    """
    if contour.frames == 0:
        raise ValueError("empty contour")
    m = contour.frames
    out = np.zeros(m * hop)
    voiced = contour.voiced
    t = 0
    while t < m:
        if not voiced[t]:
            t += 1
            continue
        run_start = t
        while t < m and voiced[t]:
            t += 1
        run_end = t - 1
        s0, s1 = run_start * hop, (run_end + 1) * hop
        s = np.arange(s0, s1)
        u = np.clip(s / hop - 0.5, run_start, run_end)
        j = np.minimum(np.floor(u).astype(np.int64), run_end - 1) if run_end > run_start else np.full(len(s), run_start)
        if run_end > run_start:
            w = u - j
            out[s0:s1] = (1.0 - w) * contour.f0_hz[j] + w * contour.f0_hz[j + 1]
        else:
            out[s0:s1] = contour.f0_hz[run_start]
    return out
