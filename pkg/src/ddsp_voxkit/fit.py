"""Fitting the synthesizer to a target utterance and scoring the result.

One utterance, one parameter net: features are extracted once, then every
step runs predict -> synthesize (fresh noise phases) -> log-mel -> L1
against the target mel, backpropagates, and takes an AdamW step with
exponentially decayed learning rate. Training optionally samples a random
contiguous slice of frames per step, which bounds step cost on long
inputs. Everything is driven by a single seeded generator, so a fit is
exactly reproducible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioBuffer
from .autodiff import ShapeError, Tape
from .features import (
    AMP_FLOOR,
    HOP_SIZE,
    WIN_SIZE,
    MelSpectrogram,
    default_melfb,
    log_mel,
    periodic_hann,
)
from .paramnet import (
    build_cond_features,
    init_weights_rng,
    predict_graph,
    standardize_cond,
    weights_as_leaves,
)
from .pitch import F0Contour, extract_f0, interpolate_f0_to_samples
from .synth import NOISE_BINS, draw_noise_phase, dsp_graph, harmonic_sine_table

ADAM_EPS = 1e-8
MIN_FIT_SECONDS = 0.5


class MetricUndefined(ValueError):
    """A metric has no defined value on these inputs (too few voiced frames...)."""


def active_dtype():
    """float64 in test mode (DDSP_TEST_F64=1), float32 fast mode otherwise."""
    return np.float64 if os.environ.get("DDSP_TEST_F64") == "1" else np.float32


@dataclass
class FitConfig:
    lr: float = 1e-4
    lr_decay: float = 0.999996
    beta1: float = 0.8
    beta2: float = 0.99
    weight_decay: float = 0.01
    lambda_dsp: float = 45.0
    steps: int = 2000
    seed: int = 0
    slice_frames: int = 37

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


def loss_dsp(target_mel: MelSpectrogram, dsp_audio: AudioBuffer) -> float:
    """Unscaled mean |log-mel difference|; training multiplies by lambda_dsp."""
    synth_mel = log_mel(dsp_audio)
    if synth_mel.frames != target_mel.frames:
        raise ShapeError(
            f"mel frames differ: target {target_mel.frames}, dsp {synth_mel.frames}"
        )
    return float(np.abs(target_mel.values - synth_mel.values).mean())


def init_adamw_state(weights: dict) -> dict:
    return {
        "m": {k: np.zeros_like(v) for k, v in weights.items()},
        "v": {k: np.zeros_like(v) for k, v in weights.items()},
    }


def adamw_step(
    weights: dict, grads: dict, state: dict, config: FitConfig, step_index: int
) -> tuple[dict, dict]:
    """Decoupled-weight-decay Adam with bias correction; mutates in place.

    Decay is applied to the weights before the Adam update, and the
    effective rate is lr * lr_decay**step_index.
    """
    missing = [k for k in weights if k not in grads]
    if missing:
        raise KeyError(f"gradients missing for {missing}")
    lr_t = config.lr * config.lr_decay**step_index
    t = step_index + 1
    bc1 = 1.0 - config.beta1**t
    bc2 = 1.0 - config.beta2**t
    for name, w in weights.items():
        g = grads[name]
        w *= 1.0 - lr_t * config.weight_decay
        m = state["m"][name]
        v = state["v"][name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        w -= lr_t * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return weights, state


@dataclass
class FitArtifacts:
    """Everything fit_utterance derived from the target besides the weights."""

    target_mel: MelSpectrogram | None = None
    contour: F0Contour | None = None
    cond: np.ndarray | None = None
    phase_offsets: np.ndarray | None = None
    loss_history: list = field(default_factory=list)


def fit_utterance(
    audio: AudioBuffer,
    config: FitConfig,
    dtype=None,
    artifacts: FitArtifacts | None = None,
) -> tuple[dict, list]:
    """Fit net weights so the rendered y_dsp matches `audio` under mel L1.

    Returns (weights, per-step unscaled loss history). Pass an empty
    FitArtifacts-shaped holder via `artifacts` to retrieve the cached
    features and phase offsets for later rendering.
    """
    if len(audio) < MIN_FIT_SECONDS * audio.sample_rate:
        raise ValueError(f"need at least {MIN_FIT_SECONDS} s of audio")
    dtype = np.dtype(dtype) if dtype is not None else np.dtype(active_dtype())

    target_mel = log_mel(audio)
    contour = extract_f0(audio)
    cond_raw = build_cond_features(target_mel, contour)
    cond = standardize_cond(cond_raw).astype(dtype)
    m_frames = target_mel.frames

    rng = np.random.default_rng(config.seed)
    phase_offsets = rng.uniform(-np.pi, np.pi, 32)
    weights = {k: v.astype(dtype) for k, v in init_weights_rng(rng).items()}
    state = init_adamw_state(weights)

    f0s = interpolate_f0_to_samples(contour, HOP_SIZE)
    sine_table = harmonic_sine_table(f0s, phase_offsets, dtype=dtype)
    melfb = default_melfb().astype(dtype)
    window = periodic_hann(WIN_SIZE).astype(dtype)

    do_slice = 0 < config.slice_frames < m_frames
    history: list[float] = []
    for step in range(config.steps):
        if do_slice:
            s0 = int(rng.integers(0, m_frames - config.slice_frames + 1))
            n_frames = config.slice_frames
        else:
            s0, n_frames = 0, m_frames
        # fresh noise phases each step, same edge-bin snapping as
        # draw_noise_phase but fed from the fit's own generator
        noise_phase = rng.uniform(-np.pi, np.pi, (n_frames, NOISE_BINS))
        noise_phase[:, 0] = np.where(noise_phase[:, 0] >= 0.0, 0.0, np.pi)
        noise_phase[:, -1] = np.where(noise_phase[:, -1] >= 0.0, 0.0, np.pi)

        tape = Tape(dtype)
        leaves = weights_as_leaves(tape, weights)
        a, c, an = predict_graph(tape, cond[s0 : s0 + n_frames], leaves)
        table = sine_table[s0 * HOP_SIZE : (s0 + n_frames) * HOP_SIZE]
        y = dsp_graph(tape, a, c, an, table, noise_phase.astype(dtype))

        n_loss_frames = (n_frames * HOP_SIZE - WIN_SIZE) // HOP_SIZE + 1
        ym = tape.mel_project(y, melfb, window, HOP_SIZE, AMP_FLOOR)
        target = target_mel.values[s0 : s0 + n_loss_frames].astype(dtype)
        unscaled = tape.l1_loss(ym, tape.constant(target))
        scaled = tape.mul(unscaled, config.lambda_dsp)

        grads = tape.backward(scaled)
        adamw_step(weights, grads, state, config, step)
        history.append(float(unscaled.data))

    if artifacts is not None:
        artifacts.target_mel = target_mel
        artifacts.contour = contour
        artifacts.cond = cond_raw
        artifacts.phase_offsets = phase_offsets
        artifacts.loss_history = history
    return weights, history


def render_utterance(
    weights: dict,
    cond: np.ndarray,
    contour: F0Contour,
    phase_offsets: np.ndarray,
    noise_seed: int,
    dtype=None,
) -> AudioBuffer:
    """Forward-only render: predict params from `cond`, synthesize y_dsp."""
    dtype = np.dtype(dtype) if dtype is not None else np.dtype(active_dtype())
    tape = Tape(dtype, check_finite=False)
    leaves = {k: tape.constant(v.astype(dtype)) for k, v in weights.items()}
    a, c, an = predict_graph(tape, standardize_cond(cond).astype(dtype), leaves)
    f0s = interpolate_f0_to_samples(contour, HOP_SIZE)
    table = harmonic_sine_table(f0s, phase_offsets, dtype=dtype)
    phase = draw_noise_phase(noise_seed, contour.frames)
    y = dsp_graph(tape, a, c, an, table, phase.astype(dtype))
    return AudioBuffer(y.data.astype(np.float64), 16000)


def f0_pcc(a: F0Contour, b: F0Contour) -> float:
    """Pearson correlation of f0 over frames voiced in both contours.

    Population (1/N) normalization; fewer than two common voiced frames or
    zero variance raise MetricUndefined rather than returning NaN.
    """
    if a.frames != b.frames:
        raise ShapeError(f"contour lengths differ: {a.frames} vs {b.frames}")
    mask = a.voiced & b.voiced
    n = int(mask.sum())
    if n < 2:
        raise MetricUndefined(f"only {n} frames voiced in both contours")
    x = a.f0_hz[mask]
    y = b.f0_hz[mask]
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).mean())
    sy = np.sqrt((yc * yc).mean())
    if sx == 0.0 or sy == 0.0:
        raise MetricUndefined("zero f0 variance on common voiced frames")
    return float((xc * yc).mean() / (sx * sy))


def voicing_agreement(a: F0Contour, b: F0Contour) -> float:
    if a.frames != b.frames:
        raise ShapeError(f"contour lengths differ: {a.frames} vs {b.frames}")
    return float((a.voiced == b.voiced).mean())


def eval_report(target: AudioBuffer, synth: AudioBuffer) -> dict:
    """Unscaled mel L1, F0-PCC and voicing agreement for a rendered result.

    Durations must agree within one analysis window: a render spans
    frames*hop samples, which is up to win-hop samples short of the audio
    it was fitted to, so the guard admits the pipeline's own artifacts
    while still rejecting grossly mismatched pairs. Frame counts are
    truncated to the common length. f0_pcc is None when undefined.
    """
    if abs(len(target) - len(synth)) >= WIN_SIZE:
        raise ShapeError(
            f"duration mismatch: {len(target)} vs {len(synth)} samples"
        )
    mel_t = log_mel(target)
    mel_s = log_mel(synth)
    m = min(mel_t.frames, mel_s.frames)
    mel_l1 = float(np.abs(mel_t.values[:m] - mel_s.values[:m]).mean())

    f0_t = extract_f0(target)
    f0_s = extract_f0(synth)
    f0_t = F0Contour(f0_t.f0_hz[:m], f0_t.voiced[:m])
    f0_s = F0Contour(f0_s.f0_hz[:m], f0_s.voiced[:m])
    try:
        pcc = f0_pcc(f0_t, f0_s)
    except MetricUndefined:
        pcc = None
    return {
        "mel_l1": mel_l1,
        "f0_pcc": pcc,
        "voicing_agreement": voicing_agreement(f0_t, f0_s),
    }
