"""Minimal layered network engine with exact backpropagation.

Tensors are plain numpy arrays with frames on the leading axis. A network is
one or more input streams (each a chain of layers), whose outputs are
concatenated per frame and fed to a shared trunk. Single-stream networks are
the degenerate case with no fusion.

Layer kinds: dense, 1-D convolution along a chosen axis of the flat feature
vector, non-overlapping 1-D max pooling, elementwise activations, softmax.
Parameters are stored in the network's dtype (float32 by default); losses
accumulate in double precision.

The mutation contract is single-threaded: `forward(..., mode="train")`
caches activations on the layers, `backward` consumes that cache. Eval-mode
forward caches nothing and is safe on a shared graph.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .errors import ConfigError, DivergenceError, FormatError, ShapeError, StateError

# When enabled, forward/backward assert every intermediate tensor is finite.
DEBUG_CHECK_FINITE = False

_NNG_MAGIC = b"NNG1"

_KIND_CODES = {"dense": 0, "conv1d": 1, "maxpool1d": 2, "activation": 3, "softmax": 4}
_ACT_CODES = {"sigmoid": 0, "relu": 1, "linear": 2}
_AXIS_CODES = {"frequency": 0, "time": 1}


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                   dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _check_finite(name: str, arr: np.ndarray) -> None:
    if DEBUG_CHECK_FINITE and not np.all(np.isfinite(arr)):
        raise DivergenceError(f"non-finite values after {name}")


class Dense:
    kind = "dense"

    def __init__(self, n_in: int, n_out: int, rng=None, dtype=np.float32):
        if n_in <= 0 or n_out <= 0:
            raise ConfigError("dense layer sizes must be positive")
        self.n_in = n_in
        self.n_out = n_out
        if rng is None:
            self.weight = np.zeros((n_in, n_out), dtype=dtype)
        else:
            self.weight = glorot_uniform(rng, (n_in, n_out), n_in, n_out, dtype)
        self.bias = np.zeros(n_out, dtype=dtype)
        self._cache = None

    @property
    def in_dim(self):
        return self.n_in

    def out_dim(self, in_dim: int) -> int:
        return self.n_out

    def param_arrays(self):
        return [self.weight, self.bias]

    def forward(self, x, train):
        if train:
            self._cache = x
        return x @ self.weight + self.bias

    def backward(self, dy):
        x = self._cache
        dw = x.T @ dy
        db = dy.sum(axis=0)
        dx = dy @ self.weight.T
        return dx, [dw, db]

    def clone(self):
        other = Dense(self.n_in, self.n_out, dtype=self.weight.dtype)
        other.weight = self.weight.copy()
        other.bias = self.bias.copy()
        return other


class Conv1d:
    """Valid 1-D convolution along one axis of the flat feature vector.

    The incoming (T, D) tensor is viewed as (T, n_positions, in_channels);
    `view_shape`/`view_perm` optionally reinterpret D through a reshape and
    axis permutation first (used to carve the frequency axis out of spliced
    features). Output is (T, out_positions * n_filters), position-major.
    """

    kind = "conv1d"

    def __init__(self, axis: str, n_filters: int, filter_width: int,
                 in_channels: int, n_positions: int,
                 view_shape=None, view_perm=None, rng=None, dtype=np.float32):
        if axis not in _AXIS_CODES:
            raise ConfigError(f"unknown convolution axis {axis!r}")
        if min(n_filters, filter_width, in_channels, n_positions) <= 0:
            raise ConfigError("convolution sizes must be positive")
        if filter_width > n_positions:
            raise ConfigError(
                f"filter width {filter_width} exceeds {n_positions} positions")
        if view_shape is not None:
            view_shape = tuple(int(s) for s in view_shape)
            view_perm = tuple(int(p) for p in view_perm) if view_perm else None
            if int(np.prod(view_shape)) != n_positions * in_channels:
                raise ConfigError("view shape does not match layer dimensions")
        self.axis = axis
        self.n_filters = n_filters
        self.filter_width = filter_width
        self.in_channels = in_channels
        self.n_positions = n_positions
        self.view_shape = view_shape
        self.view_perm = view_perm
        kc = filter_width * in_channels
        if rng is None:
            self.weight = np.zeros((kc, n_filters), dtype=dtype)
        else:
            self.weight = glorot_uniform(rng, (kc, n_filters), kc, n_filters, dtype)
        self.bias = np.zeros(n_filters, dtype=dtype)
        self._cache = None

    @property
    def in_dim(self):
        return self.n_positions * self.in_channels

    @property
    def out_positions(self):
        return self.n_positions - self.filter_width + 1

    def out_dim(self, in_dim: int) -> int:
        return self.out_positions * self.n_filters

    def param_arrays(self):
        return [self.weight, self.bias]

    def _to_view(self, x):
        t = x.shape[0]
        if self.view_shape is not None:
            xv = x.reshape((t,) + self.view_shape)
            if self.view_perm is not None:
                xv = xv.transpose((0,) + tuple(p + 1 for p in self.view_perm))
        else:
            xv = x.reshape(t, self.n_positions, self.in_channels)
        return np.ascontiguousarray(xv.reshape(t, self.n_positions, self.in_channels))

    def _from_view(self, dxv):
        t = dxv.shape[0]
        if self.view_shape is not None and self.view_perm is not None:
            permuted = tuple(self.view_shape[p] for p in self.view_perm)
            dxv = dxv.reshape((t,) + permuted)
            inverse = np.argsort(self.view_perm)
            dxv = dxv.transpose((0,) + tuple(int(p) + 1 for p in inverse))
        return dxv.reshape(t, self.in_dim)

    def forward(self, x, train):
        t = x.shape[0]
        k, p_out = self.filter_width, self.out_positions
        xv = self._to_view(x)
        # (T, P_out, C, K) view -> (T*P_out, K*C) im2col matrix
        xw = sliding_window_view(xv, k, axis=1).transpose(0, 1, 3, 2)
        xw = np.ascontiguousarray(xw).reshape(t * p_out, k * self.in_channels)
        y = xw @ self.weight + self.bias
        if train:
            self._cache = (xw, t)
        return y.reshape(t, p_out * self.n_filters)

    def backward(self, dy):
        xw, t = self._cache
        k, c, p_out = self.filter_width, self.in_channels, self.out_positions
        dy2 = dy.reshape(t * p_out, self.n_filters)
        dw = xw.T @ dy2
        db = dy2.sum(axis=0)
        # col2im: one gemm back to window space, then overlap-add per offset
        dcol = (dy2 @ self.weight.T).reshape(t, p_out, k, c)
        dxv = np.zeros((t, self.n_positions, c), dtype=dy.dtype)
        for w in range(k):
            dxv[:, w:w + p_out, :] += dcol[:, :, w, :]
        return self._from_view(dxv), [dw, db]

    def clone(self):
        other = Conv1d(self.axis, self.n_filters, self.filter_width,
                       self.in_channels, self.n_positions,
                       self.view_shape, self.view_perm, dtype=self.weight.dtype)
        other.weight = self.weight.copy()
        other.bias = self.bias.copy()
        return other


class MaxPool1d:
    """Non-overlapping max pooling over positions, per channel.

    Input is (T, n_positions * n_channels) position-major; trailing positions
    that do not fill a whole pool are dropped, matching floor(P / pool).
    """

    kind = "maxpool1d"

    def __init__(self, pool_size: int, n_positions: int, n_channels: int):
        if min(pool_size, n_positions, n_channels) <= 0:
            raise ConfigError("pooling sizes must be positive")
        if pool_size > n_positions:
            raise ConfigError(
                f"pool size {pool_size} exceeds {n_positions} positions")
        self.pool_size = pool_size
        self.n_positions = n_positions
        self.n_channels = n_channels
        self._cache = None

    @property
    def in_dim(self):
        return self.n_positions * self.n_channels

    @property
    def out_positions(self):
        return self.n_positions // self.pool_size

    def out_dim(self, in_dim: int) -> int:
        return self.out_positions * self.n_channels

    def param_arrays(self):
        return []

    def forward(self, x, train):
        t = x.shape[0]
        k, p_out, c = self.pool_size, self.out_positions, self.n_channels
        xw = x.reshape(t, self.n_positions, c)[:, :p_out * k, :]
        xw = xw.reshape(t, p_out, k, c)
        y = xw.max(axis=2)
        if train:
            self._cache = (xw.argmax(axis=2), t)
        return y.reshape(t, p_out * c)

    def backward(self, dy):
        idx, t = self._cache
        k, p_out, c = self.pool_size, self.out_positions, self.n_channels
        dxw = np.zeros((t, p_out, k, c), dtype=dy.dtype)
        np.put_along_axis(dxw, idx[:, :, None, :],
                          dy.reshape(t, p_out, 1, c), axis=2)
        dx = np.zeros((t, self.n_positions, c), dtype=dy.dtype)
        dx[:, :p_out * k, :] = dxw.reshape(t, p_out * k, c)
        return dx.reshape(t, self.in_dim), []

    def clone(self):
        return MaxPool1d(self.pool_size, self.n_positions, self.n_channels)


class Activation:
    kind = "activation"

    def __init__(self, fn: str = "sigmoid"):
        if fn not in _ACT_CODES:
            raise ConfigError(f"unknown activation {fn!r}")
        self.fn = fn
        self._cache = None

    in_dim = None

    def out_dim(self, in_dim: int) -> int:
        return in_dim

    def param_arrays(self):
        return []

    def forward(self, x, train):
        if self.fn == "sigmoid":
            y = expit(x)
        elif self.fn == "relu":
            y = np.maximum(x, 0)
        else:
            y = x
        if train:
            self._cache = y
        return y

    def backward(self, dy):
        y = self._cache
        if self.fn == "sigmoid":
            return dy * y * (1.0 - y), []
        if self.fn == "relu":
            return dy * (y > 0), []
        return dy, []

    def clone(self):
        return Activation(self.fn)


class Softmax:
    kind = "softmax"

    def __init__(self):
        self._cache = None

    in_dim = None

    def out_dim(self, in_dim: int) -> int:
        return in_dim

    def param_arrays(self):
        return []

    def forward(self, x, train):
        z = np.asarray(x, dtype=np.float64)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        y = (e / e.sum(axis=1, keepdims=True)).astype(x.dtype)
        if train:
            self._cache = (x, y)
        return y

    def backward(self, dy):
        _, y = self._cache
        inner = (dy * y).sum(axis=1, keepdims=True)
        return y * (dy - inner), []

    def cached_input(self):
        if self._cache is None:
            raise StateError("softmax layer has no cached activations")
        return self._cache[0]

    def clone(self):
        return Softmax()


@dataclass
class Stream:
    """One input branch: named input of `input_dim` features through `layers`."""

    input_name: str
    input_dim: int
    layers: list


@dataclass(frozen=True)
class FusionLayout:
    """Sizes of the concatenated feature maps fed to the trunk."""

    freq_stream_dims: int
    time_stream_dims: int

    @property
    def fused_dims(self) -> int:
        return self.freq_stream_dims + self.time_stream_dims


@dataclass
class NetworkGraph:
    streams: list
    trunk: list
    dtype: type = np.float32
    _train_ready: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.shape_ledger()  # validates that layer dimensions chain

    def all_layers(self):
        layers = []
        for stream in self.streams:
            layers.extend(stream.layers)
        layers.extend(self.trunk)
        return layers

    def input_dims(self) -> dict:
        dims = {}
        for stream in self.streams:
            if dims.setdefault(stream.input_name, stream.input_dim) != stream.input_dim:
                raise ConfigError(
                    f"streams disagree on the size of input {stream.input_name!r}")
        return dims

    def stream_out_dims(self) -> list:
        out = []
        for stream in self.streams:
            d = stream.input_dim
            for layer in stream.layers:
                d = layer.out_dim(d)
            out.append(d)
        return out

    @property
    def fusion(self) -> FusionLayout | None:
        if len(self.streams) < 2:
            return None
        dims = self.stream_out_dims()
        return FusionLayout(dims[0], int(sum(dims[1:])))

    def shape_ledger(self):
        """Per-layer (scope, kind, in_dim, out_dim) entries, validating the chain."""
        ledger = []
        for s, stream in enumerate(self.streams):
            d = stream.input_dim
            for layer in stream.layers:
                expected = layer.in_dim
                if expected is not None and expected != d:
                    raise ConfigError(
                        f"stream {s} layer {layer.kind}: expects {expected} "
                        f"inputs but receives {d}")
                d_out = layer.out_dim(d)
                ledger.append((f"stream{s}:{stream.input_name}", layer.kind, d, d_out))
                d = d_out
        d = int(sum(self.stream_out_dims()))
        for layer in self.trunk:
            expected = layer.in_dim
            if expected is not None and expected != d:
                raise ConfigError(
                    f"trunk layer {layer.kind}: expects {expected} inputs "
                    f"but receives {d}")
            d_out = layer.out_dim(d)
            ledger.append(("trunk", layer.kind, d, d_out))
            d = d_out
        return ledger

    def output_dim(self) -> int:
        return self.shape_ledger()[-1][3]

    def cached_logits(self):
        """Input of the final softmax layer from the last train-mode forward."""
        if not self.trunk or self.trunk[-1].kind != "softmax":
            raise StateError("network does not end with a softmax layer")
        if not self._train_ready:
            raise StateError("no cached activations; run forward in train mode")
        return self.trunk[-1].cached_input()

    def copy(self):
        streams = [Stream(s.input_name, s.input_dim, [l.clone() for l in s.layers])
                   for s in self.streams]
        trunk = [l.clone() for l in self.trunk]
        return NetworkGraph(streams, trunk, self.dtype)


@dataclass
class Gradients:
    """One list of arrays per layer (matching param_arrays), plus input grads."""

    by_layer: list
    input_grads: dict


def _as_input_dict(net: NetworkGraph, inputs) -> dict:
    names = list(net.input_dims())
    if isinstance(inputs, dict):
        missing = [n for n in names if n not in inputs]
        if missing:
            raise ShapeError(f"missing network inputs: {missing}")
        return inputs
    if len(names) != 1:
        raise ShapeError(
            f"network needs inputs {names}; pass a dict of tensors")
    return {names[0]: inputs}


def forward(net: NetworkGraph, inputs, mode: str = "eval"):
    """Run all layers; in train mode, activations are cached for backward."""
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    train = mode == "train"
    tensors = _as_input_dict(net, inputs)
    dims = net.input_dims()

    outputs = []
    n_frames = None
    for s, stream in enumerate(net.streams):
        x = np.asarray(tensors[stream.input_name], dtype=net.dtype)
        if x.ndim != 2 or x.shape[1] != dims[stream.input_name]:
            raise ShapeError(
                f"input {stream.input_name!r}: expected (T, "
                f"{dims[stream.input_name]}), got {x.shape}")
        if n_frames is None:
            n_frames = x.shape[0]
        elif x.shape[0] != n_frames:
            raise ShapeError("input streams disagree on frame count")
        for i, layer in enumerate(stream.layers):
            x = layer.forward(x, train)
            _check_finite(f"stream {s} layer {i} ({layer.kind})", x)
        outputs.append(x)

    h = outputs[0] if len(outputs) == 1 else np.concatenate(outputs, axis=1)
    for i, layer in enumerate(net.trunk):
        h = layer.forward(h, train)
        _check_finite(f"trunk layer {i} ({layer.kind})", h)
    net._train_ready = train
    return h


def backward(net: NetworkGraph, loss_grad, at_logits: bool = False) -> Gradients:
    """Backpropagate a loss gradient through the cached forward pass.

    With at_logits=True the gradient is taken with respect to the input of a
    final softmax layer (the fused softmax/cross-entropy path); otherwise it
    is with respect to the network output.
    """
    if not net._train_ready:
        raise StateError("backward requires a preceding train-mode forward")
    trunk = list(net.trunk)
    if at_logits:
        if not trunk or trunk[-1].kind != "softmax":
            raise StateError("at_logits requires a trailing softmax layer")
        trunk = trunk[:-1]

    grads_by_id = {}
    dy = np.asarray(loss_grad, dtype=net.dtype)
    for layer in reversed(trunk):
        dy, pgrads = layer.backward(dy)
        grads_by_id[id(layer)] = pgrads
        _check_finite(f"backward {layer.kind}", dy)
    if at_logits:
        grads_by_id[id(net.trunk[-1])] = []

    input_grads = {}
    offset = 0
    for stream, width in zip(net.streams, net.stream_out_dims()):
        dx = dy[:, offset:offset + width]
        offset += width
        for layer in reversed(stream.layers):
            dx, pgrads = layer.backward(dx)
            grads_by_id[id(layer)] = pgrads
            _check_finite(f"backward {layer.kind}", dx)
        if stream.input_name in input_grads:
            input_grads[stream.input_name] = input_grads[stream.input_name] + dx
        else:
            input_grads[stream.input_name] = dx

    by_layer = [grads_by_id[id(layer)] for layer in net.all_layers()]
    return Gradients(by_layer, input_grads)


def sgd_step(net: NetworkGraph, grads: Gradients, lr: float,
             batch_size: int = 1) -> None:
    """Plain SGD update: p <- p - lr * g / batch_size.

    Pass batch_size=1 when the loss gradient was already normalized by the
    number of frames (the convention of this module's loss functions);
    batch_size=N when the gradients are per-batch sums.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    scale = lr / batch_size
    for layer, pgrads in zip(net.all_layers(), grads.by_layer):
        params = layer.param_arrays()
        if len(params) != len(pgrads):
            raise ShapeError("gradient structure does not match network")
        for p, g in zip(params, pgrads):
            if not np.all(np.isfinite(g)):
                raise DivergenceError(f"non-finite gradient in {layer.kind} layer")
            p -= (scale * g).astype(p.dtype)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns (loss, grad) with grad = (softmax - one_hot) / n_frames taken
    with respect to the logits. Accumulates in double precision.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match {n} frames")
    if labels.min() < 0 or labels.max() >= k:
        raise ShapeError(f"label outside [0, {k})")
    z = logits.astype(np.float64)
    z -= z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z[np.arange(n), labels]))
    probs = np.exp(z - log_norm[:, None])
    probs[np.arange(n), labels] -= 1.0
    return loss, (probs / n).astype(logits.dtype)


def mse_loss(pred, target):
    """Mean squared error over all entries; grad = 2 (pred - target) / size."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    loss = float(np.mean(np.square(diff)))
    return loss, (2.0 * diff / diff.size).astype(pred.dtype)


def count_parameters(net: NetworkGraph) -> int:
    return int(sum(p.size for layer in net.all_layers()
                   for p in layer.param_arrays()))


# ---------------------------------------------------------------------------
# Checkpoint serialization (magic "NNG1"; parameters stored as float32)
# ---------------------------------------------------------------------------

def _pack_layer_spec(layer) -> bytes:
    out = struct.pack("<B", _KIND_CODES[layer.kind])
    if layer.kind == "dense":
        out += struct.pack("<II", layer.n_in, layer.n_out)
    elif layer.kind == "conv1d":
        out += struct.pack("<BIIII", _AXIS_CODES[layer.axis], layer.n_filters,
                           layer.filter_width, layer.in_channels,
                           layer.n_positions)
        if layer.view_shape is None:
            out += struct.pack("<B", 0)
        else:
            rank = len(layer.view_shape)
            out += struct.pack("<B", rank)
            out += struct.pack(f"<{rank}I", *layer.view_shape)
            perm = layer.view_perm or tuple(range(rank))
            out += struct.pack(f"<{rank}B", *perm)
    elif layer.kind == "maxpool1d":
        out += struct.pack("<III", layer.pool_size, layer.n_positions,
                           layer.n_channels)
    elif layer.kind == "activation":
        out += struct.pack("<B", _ACT_CODES[layer.fn])
    return out


class _Reader:
    def __init__(self, buf: bytes, offset: int):
        self.buf = buf
        self.offset = offset

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.buf):
            raise FormatError("truncated network checkpoint")
        vals = struct.unpack_from(fmt, self.buf, self.offset)
        self.offset += size
        return vals

    def take_bytes(self, n: int) -> bytes:
        if self.offset + n > len(self.buf):
            raise FormatError("truncated network checkpoint")
        out = self.buf[self.offset:self.offset + n]
        self.offset += n
        return out


def _unpack_layer_spec(r: _Reader):
    (code,) = r.take("<B")
    kinds = {v: k for k, v in _KIND_CODES.items()}
    if code not in kinds:
        raise FormatError(f"unknown layer kind code {code}")
    kind = kinds[code]
    if kind == "dense":
        n_in, n_out = r.take("<II")
        return Dense(n_in, n_out)
    if kind == "conv1d":
        axis_code, n_filters, width, channels, positions = r.take("<BIIII")
        (rank,) = r.take("<B")
        view_shape = view_perm = None
        if rank:
            view_shape = r.take(f"<{rank}I")
            view_perm = r.take(f"<{rank}B")
        axis = {v: k for k, v in _AXIS_CODES.items()}[axis_code]
        return Conv1d(axis, n_filters, width, channels, positions,
                      view_shape, view_perm)
    if kind == "maxpool1d":
        pool, positions, channels = r.take("<III")
        return MaxPool1d(pool, positions, channels)
    if kind == "activation":
        (fn_code,) = r.take("<B")
        fn = {v: k for k, v in _ACT_CODES.items()}[fn_code]
        return Activation(fn)
    return Softmax()


def network_to_bytes(net: NetworkGraph) -> bytes:
    parts = [_NNG_MAGIC, struct.pack("<I", len(net.all_layers()))]
    parts.append(struct.pack("<I", len(net.streams)))
    for stream in net.streams:
        name = stream.input_name.encode("utf-8")
        parts.append(struct.pack("<H", len(name)) + name)
        parts.append(struct.pack("<II", stream.input_dim, len(stream.layers)))
    parts.append(struct.pack("<I", len(net.trunk)))
    for layer in net.all_layers():
        parts.append(_pack_layer_spec(layer))
    for layer in net.all_layers():
        for p in layer.param_arrays():
            parts.append(p.astype("<f4").tobytes())
    return b"".join(parts)


def network_from_bytes(buf: bytes, offset: int = 0):
    """Parse one serialized network; returns (net, offset past the record)."""
    r = _Reader(buf, offset)
    if r.take_bytes(4) != _NNG_MAGIC:
        raise FormatError("bad network checkpoint magic")
    (n_layers,) = r.take("<I")
    (n_streams,) = r.take("<I")
    stream_meta = []
    for _ in range(n_streams):
        (name_len,) = r.take("<H")
        name = r.take_bytes(name_len).decode("utf-8")
        input_dim, n_stream_layers = r.take("<II")
        stream_meta.append((name, input_dim, n_stream_layers))
    (n_trunk,) = r.take("<I")
    if sum(m[2] for m in stream_meta) + n_trunk != n_layers:
        raise FormatError("inconsistent layer counts in checkpoint")
    layers = [_unpack_layer_spec(r) for _ in range(n_layers)]
    for layer in layers:
        for p in layer.param_arrays():
            raw = r.take_bytes(4 * p.size)
            p[...] = np.frombuffer(raw, dtype="<f4").reshape(p.shape)
    streams = []
    pos = 0
    for name, input_dim, count in stream_meta:
        streams.append(Stream(name, input_dim, layers[pos:pos + count]))
        pos += count
    net = NetworkGraph(streams, layers[pos:], np.float32)
    return net, r.offset


def save_network(path, net: NetworkGraph) -> None:
    with open(path, "wb") as fh:
        fh.write(network_to_bytes(net))


def load_network(path) -> NetworkGraph:
    with open(path, "rb") as fh:
        buf = fh.read()
    net, offset = network_from_bytes(buf)
    if offset != len(buf):
        raise FormatError(f"{path}: trailing bytes after network record")
    return net
