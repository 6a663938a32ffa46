"""Harmonic-plus-noise synthesizer producing the coarse signal y_dsp.

The harmonic branch drives a bank of K=32 sine oscillators at integer
multiples of the per-sample f0, weighted by an upsampled per-frame global
amplitude and normalized harmonic distribution. Harmonics pushed past
Nyquist are masked to exactly zero, and unvoiced samples produce zero
harmonic output (the noise branch carries fricatives and silence). The
noise branch renders a magnitude spectrogram with uniformly random phases
through a COLA-normalized iSTFT (FFT 1024, hop 160, Hann).

Both branches exist once, as autodiff graph builders; the eager functions
run the same graph on a private tape so the two paths cannot drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .autodiff import ShapeError, Tape, Tensor
from .features import HOP_SIZE, periodic_hann
from .pitch import F0Contour, interpolate_f0_to_samples

SAMPLE_RATE = 16000
N_HARMONICS = 32
NOISE_FFT = 1024
NOISE_BINS = NOISE_FFT // 2 + 1
TWO_PI = 2.0 * np.pi

_NOISE_WINDOW = periodic_hann(NOISE_FFT)


@dataclass(frozen=True)
class SynthParams:
    """Per-frame synthesis controls.

    a: (frames,) global amplitude, >= 0
    c: (frames, 32) harmonic distribution, rows sum to 1
    a_noise: (frames, 513) noise magnitude spectrogram, >= 0
    """

    a: np.ndarray
    c: np.ndarray
    a_noise: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        an = np.asarray(self.a_noise, dtype=np.float64)
        if a.ndim != 1 or c.shape != (len(a), N_HARMONICS) or an.shape != (
            len(a),
            NOISE_BINS,
        ):
            raise ShapeError(
                f"SynthParams: a {a.shape}, c {c.shape}, a_noise {an.shape}"
            )
        if not (np.isfinite(a).all() and np.isfinite(c).all() and np.isfinite(an).all()):
            raise ValueError("SynthParams entries must be finite")
        if (a < 0).any() or (c < 0).any() or (an < 0).any():
            raise ValueError("SynthParams entries must be nonnegative")
        if np.abs(c.sum(axis=1) - 1.0).max() > 1e-6:
            raise ValueError("harmonic distribution rows must sum to 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a_noise", an)

    @property
    def frames(self) -> int:
        return len(self.a)


def accumulate_phase(
    f0_samples: np.ndarray,
    k: int,
    phi0: float,
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    """Instantaneous phase of harmonic k: exclusive prefix sum of 2*pi*k*f0/sr.

    phase[0] == phi0; phases are left unwrapped for sin to consume.
    """
    f0_samples = np.asarray(f0_samples, dtype=np.float64)
    if (f0_samples < 0).any():
        raise ValueError("f0 must be nonnegative")
    base = np.empty(len(f0_samples))
    base[0] = 0.0
    np.cumsum(f0_samples[:-1], out=base[1:])
    return phi0 + (TWO_PI * k / sample_rate) * base


def draw_phase_offsets(seed: int, n_harmonics: int = N_HARMONICS) -> np.ndarray:
    """One uniform [-pi, pi) initial phase per harmonic per utterance."""
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, n_harmonics)


def draw_noise_phase(seed: int, frames: int) -> np.ndarray:
    """Uniform [-pi, pi) phase per (frame, bin); DC/Nyquist snapped to {0, pi}."""
    p = np.random.default_rng(seed).uniform(-np.pi, np.pi, (frames, NOISE_BINS))
    p[:, 0] = np.where(p[:, 0] >= 0.0, 0.0, np.pi)
    p[:, -1] = np.where(p[:, -1] >= 0.0, 0.0, np.pi)
    return p


def harmonic_sine_table(
    f0_samples: np.ndarray,
    phi0: np.ndarray,
    sample_rate: int = SAMPLE_RATE,
    dtype=np.float64,
) -> np.ndarray:
    """(samples, K) masked sines: sin(phase_k) where harmonic k is live.

    A harmonic is masked to exactly zero wherever k*f0 exceeds Nyquist or
    the sample is unvoiced (f0 == 0). This matrix is constant w.r.t. the
    trainable parameters and is precomputed once per utterance.
    """
    f0_samples = np.asarray(f0_samples, dtype=np.float64)
    ks = np.arange(1, len(phi0) + 1, dtype=np.float64)
    base = np.empty(len(f0_samples))
    base[0] = 0.0
    np.cumsum(f0_samples[:-1], out=base[1:])
    phases = phi0[None, :] + np.outer((TWO_PI / sample_rate) * base, ks)
    live = (f0_samples[:, None] * ks[None, :] <= sample_rate / 2.0) & (
        f0_samples[:, None] > 0.0
    )
    return (np.sin(phases) * live).astype(dtype)


def harmonic_graph(
    tape: Tape,
    a_node: Tensor,
    c_node: Tensor,
    sine_table: np.ndarray,
) -> Tensor:
    """Differentiable harmonic branch given per-frame (frames,1) A and (frames,K) c."""
    n_samples, k = sine_table.shape
    if a_node.shape != (c_node.shape[0], 1) or c_node.shape[1] != k:
        raise ShapeError(f"harmonic_graph: a {a_node.shape}, c {c_node.shape}")
    if c_node.shape[0] * HOP_SIZE != n_samples:
        raise ShapeError(
            f"harmonic_graph: {c_node.shape[0]} frames vs {n_samples} samples"
        )
    c_up = tape.interp_upsample(c_node, HOP_SIZE)
    a_up = tape.interp_upsample(a_node, HOP_SIZE)
    weighted = tape.mul(c_up, tape.constant(sine_table))
    summed = tape.matmul(weighted, tape.constant(np.ones((k, 1))))
    return tape.reshape(tape.mul(a_up, summed), (n_samples,))


def noise_graph(
    tape: Tape,
    a_noise_node: Tensor,
    phase: np.ndarray,
    out_len: int,
) -> Tensor:
    """Differentiable noise branch: iSTFT of magnitudes with fixed random phase."""
    return tape.overlap_add_istft(
        a_noise_node, phase, NOISE_FFT, HOP_SIZE, _NOISE_WINDOW, out_len
    )


def dsp_graph(
    tape: Tape,
    a_node: Tensor,
    c_node: Tensor,
    a_noise_node: Tensor,
    sine_table: np.ndarray,
    noise_phase: np.ndarray,
) -> Tensor:
    """y_dsp = harmonic + noise, sample-aligned at frames * hop."""
    n_samples = sine_table.shape[0]
    return tape.add(
        harmonic_graph(tape, a_node, c_node, sine_table),
        noise_graph(tape, a_noise_node, noise_phase, n_samples),
    )


def _param_nodes(tape: Tape, params: SynthParams):
    a = tape.constant(params.a.reshape(-1, 1))
    c = tape.constant(params.c)
    an = tape.constant(params.a_noise)
    return a, c, an


def synth_harmonic(params: SynthParams, contour: F0Contour, seed: int) -> AudioBuffer:
    """Render the harmonic branch; initial phases drawn once from `seed`."""
    if params.frames != contour.frames:
        raise ShapeError(
            f"params frames {params.frames} != contour frames {contour.frames}"
        )
    f0s = interpolate_f0_to_samples(contour, HOP_SIZE)
    table = harmonic_sine_table(f0s, draw_phase_offsets(seed))
    tape = Tape(np.float64)
    a, c, _ = _param_nodes(tape, params)
    y = harmonic_graph(tape, a, c, table)
    return AudioBuffer(y.data, SAMPLE_RATE)


def synth_noise(params: SynthParams, seed: int) -> AudioBuffer:
    """Render the noise branch; phase spectrogram drawn from `seed`."""
    phase = draw_noise_phase(seed, params.frames)
    tape = Tape(np.float64)
    _, _, an = _param_nodes(tape, params)
    y = noise_graph(tape, an, phase, params.frames * HOP_SIZE)
    return AudioBuffer(y.data, SAMPLE_RATE)


def synth_dsp(params: SynthParams, contour: F0Contour, seed: int) -> AudioBuffer:
    """y_dsp = y_h + y_n; exactly the sum of the two branch renders."""
    yh = synth_harmonic(params, contour, seed)
    yn = synth_noise(params, seed)
    return AudioBuffer(yh.samples + yn.samples, SAMPLE_RATE)
