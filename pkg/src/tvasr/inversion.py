"""CNN speech inversion: spliced modulation features -> tract variables.

The inversion network convolves across the coefficient axis of spliced
subband-AM features (200 filters of width 8, max-pooled by 3 at full scale),
followed by three dense layers and a linear 8-unit output trained with mean
squared error. Input features are Z-normalized with statistics frozen from
the training split; those statistics travel with the trained network so that
`invert` can reproduce the exact front end.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .audio import Waveform
from .corpus import ParallelCorpus
from .errors import FormatError, StateError
from .features import (FeatureLayout, FeatureMatrix, NormStats, SpliceSpec,
                       nmc_features, z_normalize)
from .nn import (Activation, Conv1d, Dense, MaxPool1d, NetworkGraph, Stream,
                 forward, network_from_bytes, network_to_bytes)
from .synth import N_TVS, TVTrajectory
from .training import (FrameDataset, TrainConfig, TrainResult, run_training,
                       stack_utterances)

_STATS_MAGIC = b"IST1"


@dataclass
class InversionConfig:
    n_coeffs: int = 40
    splice: SpliceSpec = field(default_factory=SpliceSpec)
    n_filters: int = 200
    filter_width: int = 8
    pool: int = 3
    n_dense: int = 3
    dense_width: int = 2048
    activation: str = "sigmoid"
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def toy(cls, **overrides) -> "InversionConfig":
        """Scaled-down profile: 16 conv filters, 128-wide dense layers.

        Uses ReLU hidden units; at this scale plain SGD trains them far
        faster than the full-size default's sigmoids.
        """
        defaults = dict(n_filters=16, dense_width=128, activation="relu")
        defaults.update(overrides)
        return cls(**defaults)


@dataclass
class InversionModel:
    """Trained inversion network plus its frozen input normalization."""

    net: NetworkGraph
    stats: NormStats | None
    config: InversionConfig


def build_inversion_net(cfg: InversionConfig, seed: int = 0,
                        dtype=np.float32) -> NetworkGraph:
    rng = np.random.default_rng(seed)
    width = cfg.splice.width
    conv = Conv1d("frequency", cfg.n_filters, cfg.filter_width,
                  in_channels=width, n_positions=cfg.n_coeffs,
                  view_shape=(width, cfg.n_coeffs), view_perm=(1, 0),
                  rng=rng, dtype=dtype)
    pool = MaxPool1d(cfg.pool, conv.out_positions, cfg.n_filters)
    stream = Stream("acoustic", cfg.n_coeffs * width,
                    [conv, Activation(cfg.activation), pool])
    trunk = []
    d = pool.out_dim(None)
    for _ in range(cfg.n_dense):
        trunk.append(Dense(d, cfg.dense_width, rng, dtype))
        trunk.append(Activation(cfg.activation))
        d = cfg.dense_width
    trunk.append(Dense(d, N_TVS, rng, dtype))
    return NetworkGraph([stream], trunk, dtype)


def _utterance_features(corpus: ParallelCorpus, utts, cfg: InversionConfig):
    """Per-utterance (unnormalized NMC frames, TV targets), length-reconciled."""
    feats, targets = [], []
    for utt in utts:
        fm = nmc_features(utt.waveform, cfg.n_coeffs)
        t = min(fm.n_frames, utt.tvs.n_frames)
        feats.append(fm.frames[:t])
        targets.append(utt.tvs.frames[:t])
    return feats, targets


def _make_dataset(feats, targets, stats: NormStats, splice: SpliceSpec):
    normalized = [(f - stats.mean) / stats.std for f in feats]
    frames, indices = stack_utterances(normalized, splice)
    y = np.concatenate(targets, axis=0).astype(np.float32)
    return FrameDataset({"acoustic": (frames, indices)}, y)


def inversion_dataset(corpus: ParallelCorpus, split: str,
                      cfg: InversionConfig, stats: NormStats) -> FrameDataset:
    feats, targets = _utterance_features(corpus, corpus.split_utts(split), cfg)
    return _make_dataset(feats, targets, stats, cfg.splice)


def train_inversion_model(corpus: ParallelCorpus, cfg: InversionConfig):
    """Train the inversion CNN on the corpus train split (clean + noisy).

    Returns (InversionModel, TrainResult). The Z-normalization statistics
    are estimated on the training split only and frozen into the model.
    """
    train_feats, train_targets = _utterance_features(
        corpus, corpus.split_utts("train"), cfg)
    stacked = np.concatenate(train_feats, axis=0)
    _, stats = z_normalize(FeatureMatrix(stacked, corpus.frame_shift,
                                         FeatureLayout(cfg.n_coeffs)), None)
    train_set = _make_dataset(train_feats, train_targets, stats, cfg.splice)
    cv_set = inversion_dataset(corpus, "cv", cfg, stats)

    net = build_inversion_net(cfg, seed=cfg.train.rng_seed)
    result = run_training(net, train_set, cv_set, cfg.train, loss="mse",
                          cv_metric="mse")
    return InversionModel(result.best_net, stats, cfg), result


def invert(model: InversionModel, audio: Waveform) -> TVTrajectory:
    """Predict tract variables for one utterance, clamped to [0, 1]."""
    if model.stats is None:
        raise StateError("inversion model has no frozen normalization stats")
    if audio.sample_rate != 16000:
        raise ValueError(
            f"{audio.sample_rate} Hz input unsupported (expected 16000; "
            "resampling is out of scope)")
    fm = nmc_features(audio, model.config.n_coeffs)
    normalized, _ = z_normalize(fm, model.stats)
    frames, indices = stack_utterances([normalized.frames],
                                       model.config.splice)
    spliced = frames[indices].reshape(fm.n_frames, -1)
    pred = forward(model.net, {"acoustic": spliced}, mode="eval")
    return TVTrajectory(np.clip(pred.astype(np.float64), 0.0, 1.0),
                        fm.frame_shift)


def pearson_per_tv(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Pearson correlation per TV channel; 0 where either side is constant."""
    out = np.zeros(pred.shape[1])
    for c in range(pred.shape[1]):
        a = pred[:, c] - pred[:, c].mean()
        b = truth[:, c] - truth[:, c].mean()
        denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
        if denom > 0:
            out[c] = float(np.sum(a * b) / denom)
    return out


# ---------------------------------------------------------------------------
# Model files: network record + frozen-stats record
# ---------------------------------------------------------------------------

def save_inversion_model(path, model: InversionModel) -> None:
    if model.stats is None:
        raise StateError("refusing to save an inversion model without stats")
    cfg = model.config
    d = len(model.stats.mean)
    stats_rec = b"".join([
        _STATS_MAGIC,
        struct.pack("<IIII", cfg.n_coeffs, cfg.splice.left, cfg.splice.right, d),
        model.stats.mean.astype("<f8").tobytes(),
        model.stats.std.astype("<f8").tobytes(),
    ])
    with open(path, "wb") as fh:
        fh.write(network_to_bytes(model.net))
        fh.write(stats_rec)


def load_inversion_model(path) -> InversionModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    net, offset = network_from_bytes(buf)
    if buf[offset:offset + 4] != _STATS_MAGIC:
        raise FormatError(f"{path}: missing inversion stats record")
    offset += 4
    try:
        n_coeffs, left, right, d = struct.unpack_from("<IIII", buf, offset)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated stats record") from exc
    offset += 16
    need = offset + 16 * d
    if len(buf) < need:
        raise FormatError(f"{path}: truncated stats arrays")
    mean = np.frombuffer(buf, dtype="<f8", count=d, offset=offset).copy()
    std = np.frombuffer(buf, dtype="<f8", count=d, offset=offset + 8 * d).copy()
    cfg = InversionConfig(n_coeffs=n_coeffs, splice=SpliceSpec(left, right))
    return InversionModel(net, NormStats(mean, std), cfg)
