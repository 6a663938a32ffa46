"""Frame-level parameter estimator: conditioning features -> SynthParams.

Trunk of three ConvReLUNorm blocks (conv k3 same-padding -> relu ->
per-frame layer norm, 256 channels), then three heads: global amplitude
and noise magnitudes through an exp-sigmoid (bounded positive), harmonic
distribution through a softmax. Validity of the outputs is architectural:
any finite weights produce legal SynthParams.
"""

from __future__ import annotations

import struct

import numpy as np

from .autodiff import ShapeError, Tape, Tensor, _stable_sigmoid
from .features import MelSpectrogram
from .pitch import F0Contour, lf0
from .synth import N_HARMONICS, NOISE_BINS, SynthParams

COND_DIM = 81  # 80 log-mel + lf0
N_BLOCKS = 3
CHANNELS = 256
KERNEL = 3

EXP_SIGMOID_EXPONENT = float(np.log(10.0))
EXP_SIGMOID_FLOOR = 1e-7

CKPT_MAGIC = b"DDSPCKPT"
CKPT_VERSION = 1


def build_cond_features(mel: MelSpectrogram, contour: F0Contour) -> np.ndarray:
    """(frames, 81) conditioning matrix: log-mel columns plus an lf0 column."""
    if mel.frames != contour.frames:
        raise ShapeError(f"mel frames {mel.frames} != f0 frames {contour.frames}")
    return np.concatenate([mel.values, lf0(contour)[:, None]], axis=1)


def standardize_cond(cond: np.ndarray) -> np.ndarray:
    """Per-column zero-mean/unit-variance over the utterance's frames.

    Raw conditioning mixes log-mel around -11..0 with lf0 around 5, which
    stalls the first conv layer; the affine is recomputed identically from
    the same features at render time, so it adds no state.
    """
    mu = cond.mean(axis=0, keepdims=True)
    sd = cond.std(axis=0, keepdims=True)
    return (cond - mu) / np.where(sd > 1e-8, sd, 1.0)


def _weight_spec(cond_dim: int = COND_DIM):
    spec = []
    cin = cond_dim
    for i in range(N_BLOCKS):
        spec.append((f"block{i}.conv_w", (CHANNELS, cin, KERNEL), "uniform"))
        spec.append((f"block{i}.conv_b", (CHANNELS,), "zeros"))
        spec.append((f"block{i}.ln_g", (CHANNELS,), "ones"))
        spec.append((f"block{i}.ln_b", (CHANNELS,), "zeros"))
        cin = CHANNELS
    for head, dim in (("head_a", 1), ("head_c", N_HARMONICS), ("head_n", NOISE_BINS)):
        spec.append((f"{head}.w", (CHANNELS, dim), "uniform"))
        spec.append((f"{head}.b", (dim,), "zeros"))
    return spec


def init_weights_rng(rng: np.random.Generator, cond_dim: int = COND_DIM) -> dict:
    """Fresh weights: conv/head weights uniform +-sqrt(1/fan_in), affine identity."""
    weights = {}
    for name, shape, kind in _weight_spec(cond_dim):
        if kind == "uniform":
            fan_in = shape[1] * shape[2] if len(shape) == 3 else shape[0]
            bound = np.sqrt(1.0 / fan_in)
            weights[name] = rng.uniform(-bound, bound, shape)
        elif kind == "ones":
            weights[name] = np.ones(shape)
        else:
            weights[name] = np.zeros(shape)
    return weights


def init_weights(seed: int, cond_dim: int = COND_DIM) -> dict:
    return init_weights_rng(np.random.default_rng(seed), cond_dim)


def weights_as_leaves(tape: Tape, weights: dict) -> dict:
    """Register weights as trainable leaves without copying; the tape is
    discarded before the optimizer mutates them."""
    return {
        name: tape.leaf(value, trainable=True, name=name, copy=False)
        for name, value in weights.items()
    }


def exp_sigmoid_graph(tape: Tape, x: Tensor) -> Tensor:
    """2 * sigmoid(x)^ln(10) + 1e-7: positive, bounded, log-scaled response."""
    s = tape.sigmoid(x)
    powed = tape.exp(tape.mul(tape.log(s), EXP_SIGMOID_EXPONENT))
    return tape.add(tape.mul(powed, 2.0), EXP_SIGMOID_FLOOR)


def exp_sigmoid(x: np.ndarray) -> np.ndarray:
    s = _stable_sigmoid(np.asarray(x, dtype=np.float64))
    return 2.0 * s ** EXP_SIGMOID_EXPONENT + EXP_SIGMOID_FLOOR


def conv_relu_norm_graph(tape: Tape, x: Tensor, leaves: dict, block: int) -> Tensor:
    h = tape.conv1d(x, leaves[f"block{block}.conv_w"], leaves[f"block{block}.conv_b"])
    h = tape.relu(h)
    return tape.layer_norm(h, leaves[f"block{block}.ln_g"], leaves[f"block{block}.ln_b"])


def predict_graph(
    tape: Tape, cond: np.ndarray, leaves: dict
) -> tuple[Tensor, Tensor, Tensor]:
    """Per-frame (A, c, A_noise) nodes from a standardized conditioning matrix.

    `cond` is expected to be standardize_cond output (feature scaling is
    the caller's job so that sliced training reuses full-utterance stats).
    """
    if cond.ndim != 2 or cond.shape[1] != leaves["block0.conv_w"].shape[1]:
        raise ShapeError(f"conditioning shape {cond.shape} does not match weights")
    h = tape.constant(cond)
    for i in range(N_BLOCKS):
        h = conv_relu_norm_graph(tape, h, leaves, i)
    a = exp_sigmoid_graph(
        tape, tape.add(tape.matmul(h, leaves["head_a.w"]), leaves["head_a.b"])
    )
    c = tape.softmax(tape.add(tape.matmul(h, leaves["head_c.w"]), leaves["head_c.b"]))
    an = exp_sigmoid_graph(
        tape, tape.add(tape.matmul(h, leaves["head_n.w"]), leaves["head_n.b"])
    )
    return a, c, an


def predict_params(cond: np.ndarray, weights: dict) -> SynthParams:
    """Eager parameter prediction from raw conditioning features."""
    tape = Tape(np.float64)
    leaves = weights_as_leaves(tape, weights)
    a, c, an = predict_graph(tape, standardize_cond(cond), leaves)
    return SynthParams(a.data[:, 0], c.data, an.data)


def save_checkpoint(path, weights: dict) -> None:
    """Named float32 tensor container, DDSPFEAT-style framing."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<II", CKPT_VERSION, len(weights)))
        for name, value in weights.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", value.ndim))
            fh.write(struct.pack(f"<{value.ndim}I", *value.shape))
            fh.write(np.ascontiguousarray(value, dtype="<f4").tobytes())


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:8] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<II", raw, 8)
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    weights = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        name = raw[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}I", raw, pos)
        pos += 4 * rank
        size = int(np.prod(shape)) if rank else 1
        flat = np.frombuffer(raw[pos : pos + 4 * size], dtype="<f4")
        if len(flat) != size:
            raise ValueError(f"{path}: truncated tensor '{name}'")
        pos += 4 * size
        weights[name] = flat.reshape(shape).astype(np.float64)
    return weights
