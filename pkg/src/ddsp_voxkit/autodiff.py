"""Reverse-mode autodiff over the tensor ops the synthesis pipeline needs.

Eager tape: each op computes its forward value immediately and appends a
node (op kind, input ids, backward closure) to the tape, so tape order is
already topological and backward is a single reverse sweep. Gradients are
exact analytic adjoints; subgradient conventions are relu'(0) = 0 and
sign(0) = 0 inside l1.

A tape in float64 with the finite check on is "test mode"; float32 with
the check off is "fast mode". Finite-difference verification only makes
sense in test mode.
"""

from __future__ import annotations

import numpy as np

from .kernels import (
    conv1d_bwd,
    conv1d_fwd,
    interp_gather,
    interp_scatter,
    ola,
    ola_adjoint,
)


class ShapeError(ValueError):
    """Operands with incompatible dimensions; message carries both shapes."""


class GraphError(ValueError):
    """Structural misuse of the tape (non-scalar loss, foreign tensors...)."""


class Tensor:
    __slots__ = ("data", "node_id", "tape")

    def __init__(self, data: np.ndarray, node_id: int, tape: "Tape"):
        self.data = data
        self.node_id = node_id
        self.tape = tape

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __add__(self, other):
        return self.tape.add(self, other)

    def __radd__(self, other):
        return self.tape.add(other, self)

    def __mul__(self, other):
        return self.tape.mul(self, other)

    def __rmul__(self, other):
        return self.tape.mul(other, self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, node={self.node_id})"


class _Node:
    __slots__ = ("op", "inputs", "backward")

    def __init__(self, op: str, inputs: tuple, backward):
        self.op = op
        self.inputs = inputs
        self.backward = backward


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _rfft_adjoint(g_spec: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of x -> rfft(x, n) treating Re/Im bins as independent reals."""
    h = g_spec.copy()
    h[..., 1:-1] *= 0.5
    return np.fft.irfft(h, n=n, axis=-1) * n


def _irfft_adjoint(g_time: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of S -> irfft(S, n); returns complex gradient over half-spectrum."""
    f = np.fft.rfft(g_time, n=n, axis=-1)
    f *= 2.0 / n
    f[..., 0] *= 0.5
    f[..., -1] *= 0.5
    return f


def upsample_grid(n_in: int, factor: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Indices/weights for frame->sample linear interpolation.

    Frame t's value sits at sample t*factor + factor/2; outside the first
    and last centers the signal holds constant.
    """
    s = np.arange(n_in * factor, dtype=np.float64)
    u = np.clip(s / factor - 0.5, 0.0, float(n_in - 1))
    if n_in == 1:
        idx0 = np.zeros(len(s), dtype=np.int64)
        return idx0, idx0, np.zeros(len(s))
    idx0 = np.minimum(np.floor(u).astype(np.int64), n_in - 2)
    w = u - idx0
    return idx0, idx0 + 1, w


class Tape:
    """Append-only op record; single-writer, one backward sweep per loss."""

    def __init__(self, dtype=np.float64, check_finite: bool | None = None):
        self.dtype = np.dtype(dtype)
        self.check_finite = (
            self.dtype == np.float64 if check_finite is None else check_finite
        )
        self.nodes: list[_Node] = []
        self._trainable: dict[int, str] = {}
        self._leaf_shapes: dict[int, tuple] = {}
        self._names: set[str] = set()

    # --- construction helpers ---

    def _record(self, op: str, inputs: tuple[int, ...], data: np.ndarray, backward):
        if self.check_finite and not np.isfinite(data).all():
            raise FloatingPointError(f"non-finite values produced by op '{op}'")
        node = _Node(op, inputs, backward)
        self.nodes.append(node)
        return Tensor(data, len(self.nodes) - 1, self)

    def leaf(
        self,
        data,
        trainable: bool = False,
        name: str | None = None,
        copy: bool = True,
    ) -> Tensor:
        """Graph input. With copy=False the caller promises not to mutate
        `data` while this tape is alive (the fit loop's per-step weights)."""
        if copy:
            arr = np.array(data, dtype=self.dtype)
        else:
            arr = np.asarray(data, dtype=self.dtype)
        t = self._record("leaf", (), arr, None)
        if trainable:
            if name is None:
                name = f"leaf{t.node_id}"
            if name in self._names:
                raise GraphError(f"duplicate trainable leaf name '{name}'")
            self._names.add(name)
            self._trainable[t.node_id] = name
            self._leaf_shapes[t.node_id] = arr.shape
        return t

    def constant(self, data) -> Tensor:
        return self.leaf(data, trainable=False)

    def _wrap(self, value) -> Tensor:
        if isinstance(value, Tensor):
            if value.tape is not self:
                raise GraphError("tensor belongs to a different tape")
            return value
        return self.constant(value)

    # --- elementwise / linear algebra ---

    def add(self, a, b) -> Tensor:
        a, b = self._wrap(a), self._wrap(b)
        try:
            out = a.data + b.data
        except ValueError:
            raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}")
        ash, bsh = a.shape, b.shape

        def backward(g):
            return ((a.node_id, _unbroadcast(g, ash)), (b.node_id, _unbroadcast(g, bsh)))

        return self._record("add", (a.node_id, b.node_id), out, backward)

    def mul(self, a, b) -> Tensor:
        a, b = self._wrap(a), self._wrap(b)
        try:
            out = a.data * b.data
        except ValueError:
            raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}")
        ad, bd = a.data, b.data
        ash, bsh = a.shape, b.shape

        def backward(g):
            return (
                (a.node_id, _unbroadcast(g * bd, ash)),
                (b.node_id, _unbroadcast(g * ad, bsh)),
            )

        return self._record("mul", (a.node_id, b.node_id), out, backward)

    def matmul(self, a, b) -> Tensor:
        a, b = self._wrap(a), self._wrap(b)
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
        ad, bd = a.data, b.data

        def backward(g):
            return ((a.node_id, g @ bd.T), (b.node_id, ad.T @ g))

        return self._record("matmul", (a.node_id, b.node_id), ad @ bd, backward)

    def conv1d(self, x, w, b) -> Tensor:
        """Stride-1 same-padded convolution over axis 0 of (frames, channels)."""
        x, w, b = self._wrap(x), self._wrap(w), self._wrap(b)
        if (
            x.ndim != 2
            or w.ndim != 3
            or w.shape[1] != x.shape[1]
            or w.shape[2] % 2 != 1
            or b.shape != (w.shape[0],)
        ):
            raise ShapeError(f"conv1d: x {x.shape}, w {w.shape}, b {b.shape}")
        xd, wd = x.data, w.data
        out = conv1d_fwd(xd, wd, b.data)

        def backward(g):
            gx, gw, gb = conv1d_bwd(xd, wd, np.ascontiguousarray(g))
            return ((x.node_id, gx), (w.node_id, gw), (b.node_id, gb))

        return self._record("conv1d", (x.node_id, w.node_id, b.node_id), out, backward)

    # --- nonlinearities ---

    def relu(self, x) -> Tensor:
        x = self._wrap(x)
        mask = x.data > 0

        def backward(g):
            return ((x.node_id, g * mask),)

        return self._record("relu", (x.node_id,), x.data * mask, backward)

    def sigmoid(self, x) -> Tensor:
        x = self._wrap(x)
        y = _stable_sigmoid(x.data)

        def backward(g):
            return ((x.node_id, g * y * (1.0 - y)),)

        return self._record("sigmoid", (x.node_id,), y, backward)

    def exp(self, x) -> Tensor:
        x = self._wrap(x)
        y = np.exp(x.data)

        def backward(g):
            return ((x.node_id, g * y),)

        return self._record("exp", (x.node_id,), y, backward)

    def log(self, x) -> Tensor:
        x = self._wrap(x)
        xd = x.data

        def backward(g):
            return ((x.node_id, g / xd),)

        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(xd)
        return self._record("log", (x.node_id,), out, backward)

    def sin(self, x) -> Tensor:
        x = self._wrap(x)
        xd = x.data

        def backward(g):
            return ((x.node_id, g * np.cos(xd)),)

        return self._record("sin", (x.node_id,), np.sin(xd), backward)

    def layer_norm(self, x, gain, bias, eps: float = 1e-5) -> Tensor:
        """Per-frame normalization over the channel (last) axis, learned affine."""
        x, gain, bias = self._wrap(x), self._wrap(gain), self._wrap(bias)
        if x.ndim != 2 or gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
            raise ShapeError(
                f"layer_norm: x {x.shape}, gain {gain.shape}, bias {bias.shape}"
            )
        xd = x.data
        mu = xd.mean(axis=1, keepdims=True)
        var = ((xd - mu) ** 2).mean(axis=1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (xd - mu) * inv
        gd = gain.data

        def backward(g):
            dgain = (g * xhat).sum(axis=0)
            dbias = g.sum(axis=0)
            dxhat = g * gd
            dx = inv * (
                dxhat
                - dxhat.mean(axis=1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
            )
            return ((x.node_id, dx), (gain.node_id, dgain), (bias.node_id, dbias))

        return self._record(
            "layer_norm",
            (x.node_id, gain.node_id, bias.node_id),
            xhat * gd + bias.data,
            backward,
        )

    def softmax(self, x) -> Tensor:
        x = self._wrap(x)
        shifted = x.data - x.data.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=-1, keepdims=True)

        def backward(g):
            return ((x.node_id, y * (g - (g * y).sum(axis=-1, keepdims=True))),)

        return self._record("softmax", (x.node_id,), y, backward)

    # --- structural ops ---

    def reshape(self, x, shape) -> Tensor:
        x = self._wrap(x)
        old = x.shape

        def backward(g):
            return ((x.node_id, g.reshape(old)),)

        return self._record("reshape", (x.node_id,), x.data.reshape(shape), backward)

    def slice_(self, x, start: int, stop: int, axis: int = 0) -> Tensor:
        x = self._wrap(x)
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(start, stop)
        idx = tuple(idx)
        shape = x.shape

        def backward(g):
            gx = np.zeros(shape, dtype=g.dtype)
            gx[idx] = g
            return ((x.node_id, gx),)

        return self._record("slice", (x.node_id,), x.data[idx].copy(), backward)

    def concat(self, tensors, axis: int = 0) -> Tensor:
        ts = [self._wrap(t) for t in tensors]
        sizes = [t.shape[axis] for t in ts]
        out = np.concatenate([t.data for t in ts], axis=axis)
        splits = np.cumsum(sizes)[:-1]

        def backward(g):
            parts = np.split(g, splits, axis=axis)
            return tuple((t.node_id, p) for t, p in zip(ts, parts))

        return self._record("concat", tuple(t.node_id for t in ts), out, backward)

    def cumsum(self, x, axis: int = 0, exclusive: bool = False) -> Tensor:
        x = self._wrap(x)
        inc = np.cumsum(x.data, axis=axis)
        if exclusive:
            out = np.zeros_like(inc)
            src = [slice(None)] * x.ndim
            dst = [slice(None)] * x.ndim
            src[axis] = slice(None, -1)
            dst[axis] = slice(1, None)
            out[tuple(dst)] = inc[tuple(src)]
        else:
            out = inc

        def backward(g):
            rev = np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis)
            return ((x.node_id, rev - g if exclusive else rev),)

        return self._record("cumsum", (x.node_id,), out, backward)

    def interp_upsample(self, x, factor: int) -> Tensor:
        """Linear frame->sample upsampling; accepts (T,) or (T, D)."""
        x = self._wrap(x)
        if x.ndim not in (1, 2):
            raise ShapeError(f"interp_upsample: rank {x.ndim} input {x.shape}")
        n_in = x.shape[0]
        idx0, idx1, w = upsample_grid(n_in, factor)
        w = w.astype(self.dtype)
        flat = x.ndim == 1
        vals = x.data[:, None] if flat else x.data
        out = interp_gather(np.ascontiguousarray(vals), idx0, idx1, w)
        if flat:
            out = out[:, 0]

        def backward(g):
            g2 = g[:, None] if flat else g
            gx = interp_scatter(np.ascontiguousarray(g2), idx0, idx1, w, n_in)
            return ((x.node_id, gx[:, 0] if flat else gx),)

        return self._record("interp_upsample", (x.node_id,), out, backward)

    # --- signal-chain ops ---

    def overlap_add_istft(
        self,
        mag,
        phase: np.ndarray,
        fft_size: int,
        hop: int,
        window: np.ndarray,
        out_len: int,
    ) -> Tensor:
        """iSTFT of mag*exp(i*phase) with a fixed (non-trainable) phase.

        Synthesis-windowed overlap-add divided by the summed squared window;
        linear in mag, so the backward pass is the exact adjoint chain.
        """
        mag = self._wrap(mag)
        bins = fft_size // 2 + 1
        if mag.ndim != 2 or mag.shape[1] != bins or phase.shape != mag.shape:
            raise ShapeError(
                f"overlap_add_istft: mag {mag.shape}, phase {phase.shape}, "
                f"expected (frames, {bins})"
            )
        m = mag.shape[0]
        cover = (m - 1) * hop + fft_size
        window = window.astype(self.dtype)
        wsq = ola(np.tile(window[None, :], (m, 1)), window, hop, cover)
        # same relative coverage floor as features.istft
        good = wsq > 1e-6 * wsq.max()
        denom = np.where(good, wsq, 1.0)
        rot = np.exp(1j * phase)

        frames = np.fft.irfft(mag.data * rot, n=fft_size, axis=1)
        acc = ola(np.ascontiguousarray(frames.astype(self.dtype)), window, hop, cover)
        y = (np.where(good, acc / denom, 0.0))[:out_len]

        def backward(g):
            ga = np.zeros(cover, dtype=g.dtype)
            ga[: len(g)] = g
            ga = np.where(good, ga / denom, 0.0)
            gframes = ola_adjoint(ga, window, hop, m, fft_size)
            ds = _irfft_adjoint(gframes, fft_size)
            return ((mag.node_id, np.real(ds * np.conj(rot)).astype(g.dtype)),)

        return self._record(
            "overlap_add_istft", (mag.node_id,), y.astype(self.dtype), backward
        )

    def mel_project(
        self,
        audio,
        melfb: np.ndarray,
        window: np.ndarray,
        hop: int,
        floor: float,
    ) -> Tensor:
        """Log-mel of a waveform through a fixed filterbank, inside the graph.

        Forward matches features.log_mel exactly (magnitude STFT, melfb
        projection, natural log with an amplitude floor); cells at the floor
        pass zero gradient.
        """
        audio = self._wrap(audio)
        if audio.ndim != 1:
            raise ShapeError(f"mel_project expects 1-D audio, got {audio.shape}")
        win = len(window)
        n = audio.shape[0]
        if n < win:
            raise ShapeError(f"mel_project: audio length {n} shorter than window {win}")
        m = (n - win) // hop + 1
        window = window.astype(self.dtype)

        offsets = hop * np.arange(m)[:, None] + np.arange(win)[None, :]
        frames = audio.data[offsets] * window
        z = np.fft.rfft(frames, n=win, axis=1)
        magnitude = np.abs(z)
        mel = magnitude @ melfb.T
        clamped = np.maximum(mel, floor)
        out = np.log(clamped)

        def backward(g):
            dmel = np.where(mel > floor, g / clamped, 0.0)
            dmag = dmel @ melfb
            safe = np.where(magnitude > 0.0, magnitude, 1.0)
            dz = dmag * np.where(magnitude > 0.0, z / safe, 0.0)
            dframes = _rfft_adjoint(dz, win) * window
            gx = ola(np.ascontiguousarray(dframes.astype(g.dtype)),
                     np.ones(win, dtype=g.dtype), hop, n)
            return ((audio.node_id, gx),)

        return self._record(
            "mel_project", (audio.node_id,), out.astype(self.dtype), backward
        )

    def l1_loss(self, a, b) -> Tensor:
        """Mean absolute difference over all cells; ties get zero subgradient."""
        a, b = self._wrap(a), self._wrap(b)
        if a.shape != b.shape:
            raise ShapeError(f"l1_loss: {a.shape} vs {b.shape}")
        diff = a.data - b.data
        out = np.array(np.abs(diff).mean(), dtype=self.dtype)
        scale = 1.0 / diff.size

        def backward(g):
            s = np.sign(diff) * (float(g) * scale)
            return ((a.node_id, s), (b.node_id, -s))

        return self._record("l1_loss", (a.node_id, b.node_id), out, backward)

    # --- backward sweep ---

    def backward(self, loss: Tensor) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss for every trainable leaf on this tape.

        Leaves the loss never touched get explicit zeros, so optimizer state
        keys are stable across steps.
        """
        if loss.tape is not self:
            raise GraphError("loss tensor belongs to a different tape")
        if loss.data.shape != ():
            raise GraphError(f"loss must be scalar, got shape {loss.data.shape}")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.node_id] = np.array(1.0, dtype=self.dtype)
        for nid in range(loss.node_id, -1, -1):
            g = grads[nid]
            if g is None:
                continue
            node = self.nodes[nid]
            if node.backward is None:
                continue
            for iid, gin in node.backward(g):
                if grads[iid] is None:
                    grads[iid] = gin if gin.dtype == self.dtype else gin.astype(self.dtype)
                else:
                    grads[iid] = grads[iid] + gin
        out = {}
        for nid, name in self._trainable.items():
            g = grads[nid]
            if g is None:
                g = np.zeros(self._leaf_shapes[nid], dtype=self.dtype)
            out[name] = g
        return out
