"""Differentiable harmonic-plus-noise speech synthesis toolkit."""

from .audio_io import AudioBuffer, read_wav, resample, write_wav
from .autodiff import Tape, Tensor
from .features import MelSpectrogram, SpectrogramComplex, istft, log_mel, mel_filterbank, stft
from .fit import FitConfig, adamw_step, eval_report, f0_pcc, fit_utterance, loss_dsp
from .paramnet import init_weights, predict_params
from .pitch import F0Contour, extract_f0, interpolate_f0_to_samples
from .synth import SynthParams, accumulate_phase, synth_dsp, synth_harmonic, synth_noise

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "F0Contour",
    "FitConfig",
    "MelSpectrogram",
    "SpectrogramComplex",
    "SynthParams",
    "Tape",
    "Tensor",
    "accumulate_phase",
    "adamw_step",
    "eval_report",
    "extract_f0",
    "f0_pcc",
    "fit_utterance",
    "init_weights",
    "interpolate_f0_to_samples",
    "istft",
    "log_mel",
    "loss_dsp",
    "mel_filterbank",
    "predict_params",
    "read_wav",
    "resample",
    "stft",
    "synth_dsp",
    "synth_harmonic",
    "synth_noise",
    "write_wav",
]
