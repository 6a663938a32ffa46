"""Mono WAV reading/writing and sample-rate conversion.

Everything downstream runs at 16 kHz float; read_wav normalizes any
supported input (PCM 16-bit or IEEE float 32-bit, mono or stereo) to that
representation. The resampler is a self-contained windowed-sinc design so
the whole pipeline stays dependency-free and deterministic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

PIPELINE_RATE = 16000

_TAPS = 64              # kernel taps per output sample
_KAISER_BETA = 8.6      # ~80 dB stopband
_CUTOFF_FRACTION = 0.9  # of the smaller Nyquist


class WavFormatError(ValueError):
    """Malformed RIFF/WAVE container."""


class WavUnsupportedError(ValueError):
    """Well-formed WAV whose encoding this reader does not handle."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono signal: float64 samples nominally in [-1, 1] plus a sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if not np.isfinite(samples).all():
            raise ValueError("AudioBuffer samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _parse_chunks(raw: bytes):
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE file")
    pos = 12
    chunks = {}
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"truncated {cid!r} chunk")
        if cid not in chunks:
            chunks[cid] = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    return chunks


def read_wav(path) -> AudioBuffer:
    """Read a WAV file, downmix to mono, and resample to 16 kHz.

    Accepts PCM 16-bit (scaled by 1/32768) and IEEE float 32-bit, with one
    or two channels (stereo is downmixed by channel mean).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    chunks = _parse_chunks(raw)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise WavFormatError("missing fmt or data chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise WavFormatError("fmt chunk too short")
    audio_format, n_channels, sample_rate, _, _, bits = struct.unpack_from(
        "<HHIIHH", fmt, 0
    )
    if n_channels not in (1, 2):
        raise WavUnsupportedError(f"{n_channels} channels (expected 1 or 2)")

    data = chunks[b"data"]
    if audio_format == 1 and bits == 16:
        frame = 2 * n_channels
        n = len(data) // frame
        x = np.frombuffer(data[: n * frame], dtype="<i2").astype(np.float64)
        x /= 32768.0
    elif audio_format == 3 and bits == 32:
        frame = 4 * n_channels
        n = len(data) // frame
        x = np.frombuffer(data[: n * frame], dtype="<f4").astype(np.float64)
    else:
        raise WavUnsupportedError(
            f"format code {audio_format} with {bits}-bit samples"
        )

    if n_channels == 2:
        x = x.reshape(-1, 2).mean(axis=1)
    buf = AudioBuffer(x, int(sample_rate))
    if buf.sample_rate != PIPELINE_RATE:
        buf = resample(buf, PIPELINE_RATE)
    return buf


def write_wav(path, audio: AudioBuffer) -> None:
    """Write 16-bit PCM mono; samples are clipped to [-1, 1] and scaled by 32767."""
    x = np.clip(audio.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2")
    data = pcm.tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    hdr += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, audio.sample_rate, audio.sample_rate * 2, 2, 16
    )
    hdr += b"data" + struct.pack("<I", len(data))
    try:
        with open(path, "wb") as fh:
            fh.write(hdr + data)
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def resample(audio: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited rate conversion by a Kaiser-windowed sinc kernel.

    Cutoff sits at 0.9x the smaller of the two Nyquist frequencies; output
    length is round(len * target / source). Linear in the input by
    construction (fixed kernel weights).
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    src = audio.sample_rate
    if target_rate == src:
        return AudioBuffer(audio.samples.copy(), src)

    x = audio.samples
    out_len = int(round(len(x) * target_rate / src))
    if len(x) == 0 or out_len == 0:
        return AudioBuffer(np.zeros(0), target_rate)

    # cutoff in cycles per *input* sample
    fc = _CUTOFF_FRACTION * 0.5 * min(src, target_rate) / src
    half = _TAPS // 2

    pos = np.arange(out_len) * (src / target_rate)      # input-time of each output
    base = np.floor(pos).astype(np.int64)
    idx = base[:, None] + np.arange(-half + 1, half + 1)[None, :]
    delta = idx - pos[:, None]                          # in (-half, half]

    u = delta / half
    kaiser = np.i0(_KAISER_BETA * np.sqrt(np.maximum(1.0 - u * u, 0.0)))
    kaiser /= np.i0(_KAISER_BETA)
    weights = 2.0 * fc * np.sinc(2.0 * fc * delta) * kaiser

    valid = (idx >= 0) & (idx < len(x))
    gathered = np.where(valid, x[np.clip(idx, 0, len(x) - 1)], 0.0)
    y = np.einsum("ij,ij->i", gathered, weights)
    return AudioBuffer(y, target_rate)
