"""STFT analysis/synthesis and log-mel extraction.

Geometry is fixed across the toolkit: 640 FFT / 640 window / 160 hop at
16 kHz, no center padding, periodic Hann. Frame t covers samples
[t*hop, t*hop + win), so mel frames, pitch frames and synthesis frames all
share one 100 Hz grid.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .kernels import ola

FFT_SIZE = 640
WIN_SIZE = 640
HOP_SIZE = 160
N_MELS = 80
FMIN = 0.0
FMAX = 8000.0
AMP_FLOOR = 1e-5

# overlap-add normalization: samples whose summed squared window falls
# below this fraction of its peak carry no usable signal and are zeroed
# (dividing there would only amplify rounding noise)
WSQ_REL_FLOOR = 1e-6


class ShapeError(ValueError):
    """Dimension mismatch between related arrays."""


@dataclass(frozen=True)
class SpectrogramComplex:
    values: np.ndarray  # (frames, fft_size // 2 + 1) complex
    fft_size: int
    win: int
    hop: int
    sample_rate: int

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.fft_size // 2 + 1:
            raise ShapeError(
                f"spectrogram bins {self.values.shape} inconsistent with "
                f"fft_size {self.fft_size}"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("spectrogram values must be finite")

    @property
    def frames(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # (frames, 80) natural-log amplitudes
    frame_rate: float = 100.0

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != N_MELS:
            raise ShapeError(f"mel matrix must be (frames, {N_MELS})")

    @property
    def frames(self) -> int:
        return self.values.shape[0]


def periodic_hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_count(n_samples: int, win: int = WIN_SIZE, hop: int = HOP_SIZE) -> int:
    """Frames for an un-padded analysis; short input yields one padded frame."""
    if n_samples < win:
        return 1
    return (n_samples - win) // hop + 1


def frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    """(frames, win) view of x; input shorter than win is zero-padded."""
    if len(x) < win:
        padded = np.zeros(win, dtype=x.dtype)
        padded[: len(x)] = x
        return padded[None, :]
    m = (len(x) - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(m)[:, None]
    return x[idx]


def stft(
    audio: AudioBuffer,
    fft_size: int = FFT_SIZE,
    win: int = WIN_SIZE,
    hop: int = HOP_SIZE,
) -> SpectrogramComplex:
    if win > fft_size:
        raise ValueError(f"win {win} exceeds fft_size {fft_size}")
    if win % hop != 0:
        raise ValueError(f"hop {hop} must divide win {win}")
    frames = frame_signal(audio.samples, win, hop) * periodic_hann(win)
    values = np.fft.rfft(frames, n=fft_size, axis=1)
    return SpectrogramComplex(values, fft_size, win, hop, audio.sample_rate)


def istft(spec: SpectrogramComplex) -> AudioBuffer:
    """Weighted overlap-add inverse; exact on the fully-overlapped interior.

    Both analysis and synthesis apply the periodic Hann, so the accumulated
    signal is divided by the summed squared window wherever that sum is
    meaningfully nonzero.
    """
    window = periodic_hann(spec.win)
    frames = np.fft.irfft(spec.values, n=spec.fft_size, axis=1)[:, : spec.win]
    frames = np.ascontiguousarray(frames)
    out_len = (spec.frames - 1) * spec.hop + spec.win
    acc = ola(frames, window, spec.hop, out_len)
    wsq = ola(np.tile(window[None, :], (spec.frames, 1)), window, spec.hop, out_len)
    good = wsq > WSQ_REL_FLOOR * wsq.max()
    y = np.where(good, acc / np.where(good, wsq, 1.0), 0.0)
    return AudioBuffer(y, spec.sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = N_MELS,
    fft_size: int = FFT_SIZE,
    sample_rate: int = 16000,
    fmin: float = FMIN,
    fmax: float = FMAX,
) -> np.ndarray:
    """(n_mels, fft_size//2+1) triangular filters, HTK mel, peak weight 1.

    Centers are equally spaced on the mel scale; each filter is scaled so
    its largest weight on the FFT grid is exactly 1 (no area normalization).
    """
    if fmax > sample_rate / 2:
        raise ValueError("fmax exceeds Nyquist")
    n_bins = fft_size // 2 + 1
    freqs = np.arange(n_bins) * sample_rate / fft_size
    hz_pts = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    fb = np.zeros((n_mels, n_bins))
    for j in range(n_mels):
        lo, ctr, hi = hz_pts[j], hz_pts[j + 1], hz_pts[j + 2]
        rise = (freqs - lo) / (ctr - lo)
        fall = (hi - freqs) / (hi - ctr)
        tri = np.maximum(np.minimum(rise, fall), 0.0)
        peak = tri.max()
        if peak <= 0.0:
            raise ValueError(f"mel filter {j} covers no FFT bin")
        fb[j] = tri / peak
    return fb


_MELFB_CACHE: dict[tuple, np.ndarray] = {}


def default_melfb() -> np.ndarray:
    key = (N_MELS, FFT_SIZE, 16000, FMIN, FMAX)
    if key not in _MELFB_CACHE:
        _MELFB_CACHE[key] = mel_filterbank(*key)
    return _MELFB_CACHE[key]


def log_mel(audio: AudioBuffer) -> MelSpectrogram:
    """Natural-log mel amplitudes, floored at 1e-5, on the 100 Hz frame grid."""
    if audio.sample_rate != 16000:
        raise ValueError("log_mel expects 16 kHz input")
    spec = stft(audio)
    mag = np.abs(spec.values)
    mel = mag @ default_melfb().T
    return MelSpectrogram(np.log(np.maximum(mel, AMP_FLOOR)))


# --- binary feature dump (CLI interchange format) ---

FEAT_MAGIC = b"DDSPFEAT"
FEAT_VERSION = 1


def write_feat(path, values: np.ndarray) -> None:
    """Little-endian dump: magic, version u32, frames u32, dim u32, f32 rows."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ShapeError("feature dump expects a (frames, dim) matrix")
    frames, dim = values.shape
    with open(path, "wb") as fh:
        fh.write(FEAT_MAGIC)
        fh.write(struct.pack("<III", FEAT_VERSION, frames, dim))
        fh.write(values.astype("<f4").tobytes())


def read_feat(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 20 or raw[:8] != FEAT_MAGIC:
        raise ValueError(f"{path}: not a DDSPFEAT file")
    version, frames, dim = struct.unpack_from("<III", raw, 8)
    if version != FEAT_VERSION:
        raise ValueError(f"{path}: unsupported DDSPFEAT version {version}")
    need = 20 + 4 * frames * dim
    if len(raw) < need:
        raise ValueError(f"{path}: truncated payload")
    flat = np.frombuffer(raw[20:need], dtype="<f4")
    return flat.reshape(frames, dim).astype(np.float64)
