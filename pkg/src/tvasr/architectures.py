"""Acoustic-model topologies: DNN, CNN, TFCNN, and the fused dual-stream fCNN.

All four consume spliced acoustic features laid out as (context, stream,
band) within each flat frame vector. The frequency-convolution stream views
that vector as 40 band positions x (streams * context) channels; the
time-convolution streams view it as context positions x per-frame channels.
The fCNN's time stream instead consumes spliced tract-variable trajectories.
Stream outputs are concatenated per frame (frequency maps first) and fed to
a shared dense stack ending in a softmax layer.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, ShapeError
from .nn import (Activation, Conv1d, Dense, FusionLayout, MaxPool1d,
                 NetworkGraph, Softmax, Stream)

ACOUSTIC_INPUT = "acoustic"
TV_INPUT = "tv"

ARCH_KINDS = ("dnn", "cnn", "tfcnn", "fcnn")


@dataclass
class ArchSpec:
    """Configuration for one acoustic-model topology.

    The conv parameters follow the reference setup: 200 frequency filters of
    width 8 pooled by 3, and 75 time filters of width 5 pooled by 5. dnn/cnn/
    tfcnn consume acoustic features only; fcnn additionally needs the
    tract-variable layout for its time stream.
    """

    kind: str
    n_classes: int
    n_hidden_layers: int = 4
    hidden_width: int = 1024
    n_bands: int = 40
    n_feature_streams: int = 3
    context: int = 17
    n_tvs: int = 8
    tv_context: int = 17
    freq_filters: int = 200
    freq_filter_width: int = 8
    freq_pool: int = 3
    time_filters: int = 75
    time_filter_width: int = 5
    time_pool: int = 5
    hidden_activation: str = "sigmoid"

    def __post_init__(self):
        if self.kind not in ARCH_KINDS:
            raise ConfigError(f"unknown architecture kind {self.kind!r}")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be at least 2")
        if self.n_hidden_layers < 0:
            raise ConfigError("n_hidden_layers must be non-negative")
        for name in ("hidden_width", "n_bands", "n_feature_streams", "context",
                     "n_tvs", "tv_context", "freq_filters", "freq_filter_width",
                     "freq_pool", "time_filters", "time_filter_width", "time_pool"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def acoustic_dim(self) -> int:
        return self.n_bands * self.n_feature_streams * self.context

    @property
    def tv_dim(self) -> int:
        return self.n_tvs * self.tv_context


def _dense_stack(rng, in_dim: int, spec: ArchSpec, dtype):
    layers = []
    d = in_dim
    for _ in range(spec.n_hidden_layers):
        layers.append(Dense(d, spec.hidden_width, rng, dtype))
        layers.append(Activation(spec.hidden_activation))
        d = spec.hidden_width
    layers.append(Dense(d, spec.n_classes, rng, dtype))
    layers.append(Softmax())
    return layers


def _freq_conv_stream(rng, spec: ArchSpec, dtype) -> Stream:
    channels = spec.n_feature_streams * spec.context
    conv = Conv1d("frequency", spec.freq_filters, spec.freq_filter_width,
                  channels, spec.n_bands,
                  view_shape=(spec.context, spec.n_feature_streams, spec.n_bands),
                  view_perm=(2, 0, 1), rng=rng, dtype=dtype)
    pool = MaxPool1d(spec.freq_pool, conv.out_positions, spec.freq_filters)
    return Stream(ACOUSTIC_INPUT, spec.acoustic_dim,
                  [conv, Activation(spec.hidden_activation), pool])


def _time_conv_stream(rng, spec: ArchSpec, input_name: str, n_positions: int,
                      n_channels: int, dtype) -> Stream:
    conv = Conv1d("time", spec.time_filters, spec.time_filter_width,
                  n_channels, n_positions, rng=rng, dtype=dtype)
    pool = MaxPool1d(spec.time_pool, conv.out_positions, spec.time_filters)
    return Stream(input_name, n_positions * n_channels,
                  [conv, Activation(spec.hidden_activation), pool])


def build_dnn(spec: ArchSpec, seed: int = 0, dtype=np.float32) -> NetworkGraph:
    """Fully connected stack on the spliced acoustic input.

    n_hidden_layers=0 degenerates to multinomial logistic regression.
    """
    if spec.kind != "dnn":
        raise ConfigError(f"build_dnn got kind {spec.kind!r}")
    rng = np.random.default_rng(seed)
    stream = Stream(ACOUSTIC_INPUT, spec.acoustic_dim, [])
    return NetworkGraph([stream], _dense_stack(rng, spec.acoustic_dim, spec, dtype),
                        dtype)


def build_cnn(spec: ArchSpec, seed: int = 0, dtype=np.float32) -> NetworkGraph:
    """Frequency-convolution CNN on the spliced acoustic input."""
    if spec.kind != "cnn":
        raise ConfigError(f"build_cnn got kind {spec.kind!r}")
    rng = np.random.default_rng(seed)
    stream = _freq_conv_stream(rng, spec, dtype)
    fused = stream.layers[-1].out_dim(None)
    return NetworkGraph([stream], _dense_stack(rng, fused, spec, dtype), dtype)


def build_tfcnn(spec: ArchSpec, seed: int = 0, dtype=np.float32) -> NetworkGraph:
    """Parallel frequency and time convolutions over the same acoustic input."""
    if spec.kind != "tfcnn":
        raise ConfigError(f"build_tfcnn got kind {spec.kind!r}")
    rng = np.random.default_rng(seed)
    freq = _freq_conv_stream(rng, spec, dtype)
    time = _time_conv_stream(rng, spec, ACOUSTIC_INPUT, spec.context,
                             spec.n_feature_streams * spec.n_bands, dtype)
    fused = freq.layers[-1].out_dim(None) + time.layers[-1].out_dim(None)
    return NetworkGraph([freq, time], _dense_stack(rng, fused, spec, dtype), dtype)


def build_fcnn(spec: ArchSpec, seed: int = 0, dtype=np.float32) -> NetworkGraph:
    """Frequency convolution on acoustics, time convolution on tract variables.

    The two pooled feature maps are concatenated per frame and fed to the
    shared dense stack; forward requires both "acoustic" and "tv" inputs.
    """
    if spec.kind != "fcnn":
        raise ConfigError(f"build_fcnn got kind {spec.kind!r}")
    rng = np.random.default_rng(seed)
    freq = _freq_conv_stream(rng, spec, dtype)
    time = _time_conv_stream(rng, spec, TV_INPUT, spec.tv_context, spec.n_tvs,
                             dtype)
    fused = freq.layers[-1].out_dim(None) + time.layers[-1].out_dim(None)
    return NetworkGraph([freq, time], _dense_stack(rng, fused, spec, dtype), dtype)


_BUILDERS = {"dnn": build_dnn, "cnn": build_cnn, "tfcnn": build_tfcnn,
             "fcnn": build_fcnn}


def build_network(spec: ArchSpec, seed: int = 0, dtype=np.float32) -> NetworkGraph:
    return _BUILDERS[spec.kind](spec, seed, dtype)


def fuse_feature_maps(freq_maps: np.ndarray, time_maps: np.ndarray):
    """Concatenate per-frame feature maps, frequency maps first.

    Returns (fused, FusionLayout). Frame counts must match; a zero-width
    time stream leaves the frequency maps unchanged.
    """
    freq_maps = np.asarray(freq_maps)
    time_maps = np.asarray(time_maps)
    if freq_maps.shape[0] != time_maps.shape[0]:
        raise ShapeError(
            f"frame count mismatch: {freq_maps.shape[0]} vs {time_maps.shape[0]}")
    fused = np.concatenate([freq_maps, time_maps], axis=1)
    return fused, FusionLayout(freq_maps.shape[1], time_maps.shape[1])


# ---------------------------------------------------------------------------
# Line-oriented key=value configuration files
# ---------------------------------------------------------------------------

def parse_kv_config(path) -> dict:
    """Parse a key=value config file; '#' starts a comment, blanks ignored."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def arch_spec_from_config(mapping: dict) -> ArchSpec:
    """Build an ArchSpec from string key=value pairs; unknown keys are errors."""
    spec_fields = {f.name: f.type for f in fields(ArchSpec)}
    unknown = sorted(set(mapping) - set(spec_fields))
    if unknown:
        raise ConfigError(f"unknown architecture config keys: {unknown}")
    kwargs = {}
    for key, value in mapping.items():
        if key in ("kind", "hidden_activation"):
            kwargs[key] = value
        else:
            try:
                kwargs[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"config key {key}={value!r}: not an integer") from exc
    if "kind" not in kwargs or "n_classes" not in kwargs:
        raise ConfigError("architecture config requires kind and n_classes")
    return ArchSpec(**kwargs)
