"""Acoustic and articulatory front-end feature extraction.

Provides log-mel filterbank energies, delta/delta-delta appending, subband
amplitude-modulation coefficients for the inversion front end, per-dimension
Z-normalization, frame context splicing, and a flat binary serialization for
feature matrices.

Framing is shared by all extractors: 25 ms Hamming windows every 10 ms,
T = floor((n_samples - win) / shift) + 1 frames. Log compression uses
log(max(x, 1e-10)) so silence maps to a finite floor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.signal import butter, sosfilt

from .audio import Waveform
from .errors import FormatError, ShapeError

LOG_FLOOR = 1e-10
STD_FLOOR = 1e-8
FFT_SIZE = 512

_FMX_MAGIC = b"FMX1"


@dataclass(frozen=True)
class FeatureLayout:
    """Structure of a feature vector: n_bands x n_streams x context_width."""

    n_bands: int
    n_streams: int = 1
    context_width: int = 1

    @property
    def dim(self) -> int:
        return self.n_bands * self.n_streams * self.context_width


@dataclass
class FeatureMatrix:
    """Time-major matrix of per-frame feature vectors.

    Rows are frames, columns follow the layout: the slowest index is the
    context frame, then the stream (static/delta/delta-delta), then the band.
    """

    frames: np.ndarray
    frame_shift: float
    layout: FeatureLayout

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ShapeError("feature matrix must be 2-D with at least one frame")
        if self.frames.shape[1] != self.layout.dim:
            raise ShapeError(
                f"feature dimension {self.frames.shape[1]} does not match "
                f"layout {self.layout}"
            )
        if not np.all(np.isfinite(self.frames)):
            raise ShapeError("feature matrix contains non-finite entries")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class SpliceSpec:
    """Context window: `left` past and `right` future frames around each frame."""

    left: int = 8
    right: int = 8

    def __post_init__(self):
        if self.left < 0 or self.right < 0:
            raise ValueError("splice extents must be non-negative")

    @property
    def width(self) -> int:
        return self.left + self.right + 1


@dataclass
class NormStats:
    """Frozen per-dimension mean/std from a training set."""

    mean: np.ndarray
    std: np.ndarray


def frame_signal(x: np.ndarray, win: int, shift: int) -> np.ndarray:
    """Slice a signal into overlapping frames of `win` samples every `shift`."""
    if len(x) < win:
        raise ValueError(f"signal of {len(x)} samples is shorter than one {win}-sample window")
    n = (len(x) - win) // shift + 1
    idx = shift * np.arange(n)[:, None] + np.arange(win)[None, :]
    return x[idx]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(n_bands: int, sample_rate: int, fmin: float = 0.0,
                   fmax: float | None = None) -> np.ndarray:
    """n_bands + 2 mel-spaced edge frequencies in Hz between fmin and fmax."""
    if fmax is None:
        fmax = sample_rate / 2.0
    mels = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_bands + 2)
    return mel_to_hz(mels)


def mel_filterbank_weights(n_bands: int, sample_rate: int,
                           n_fft: int = FFT_SIZE) -> np.ndarray:
    """Triangular mel filter weights, shape (n_bands, n_fft//2 + 1)."""
    edges = mel_band_edges(n_bands, sample_rate)
    fft_freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    weights = np.zeros((n_bands, len(fft_freqs)))
    for b in range(n_bands):
        lo, center, hi = edges[b], edges[b + 1], edges[b + 2]
        up = (fft_freqs - lo) / (center - lo)
        down = (hi - fft_freqs) / (hi - center)
        weights[b] = np.maximum(0.0, np.minimum(up, down))
    return weights


def logmel_filterbank(wav: Waveform, n_bands: int = 40, win: float = 0.025,
                      shift: float = 0.010) -> FeatureMatrix:
    """Log mel filterbank energies, one n_bands vector per frame."""
    win_n = int(round(win * wav.sample_rate))
    shift_n = int(round(shift * wav.sample_rate))
    frames = frame_signal(wav.samples, win_n, shift_n) * np.hamming(win_n)
    spectrum = np.abs(np.fft.rfft(frames, FFT_SIZE, axis=1)) ** 2
    weights = mel_filterbank_weights(n_bands, wav.sample_rate)
    energies = spectrum @ weights.T
    feats = np.log(np.maximum(energies, LOG_FLOOR))
    return FeatureMatrix(feats, shift, FeatureLayout(n_bands))


_DELTA_WINDOW = 2
_DELTA_DENOM = 2 * sum(n * n for n in range(1, _DELTA_WINDOW + 1))  # = 10


def _delta(feats: np.ndarray) -> np.ndarray:
    """2-frame regression deltas with edge frames replicated."""
    padded = np.pad(feats, ((_DELTA_WINDOW, _DELTA_WINDOW), (0, 0)), mode="edge")
    t = np.arange(feats.shape[0]) + _DELTA_WINDOW
    out = np.zeros_like(feats)
    for n in range(1, _DELTA_WINDOW + 1):
        out += n * (padded[t + n] - padded[t - n])
    return out / _DELTA_DENOM


def append_deltas(fm: FeatureMatrix) -> FeatureMatrix:
    """Append delta and delta-delta streams, tripling the feature dimension."""
    if fm.layout.n_streams != 1:
        raise ShapeError("append_deltas expects single-stream features")
    d1 = _delta(fm.frames)
    d2 = _delta(d1)
    feats = np.concatenate([fm.frames, d1, d2], axis=1)
    layout = FeatureLayout(fm.layout.n_bands, 3, fm.layout.context_width)
    return FeatureMatrix(feats, fm.frame_shift, layout)


def _am_subband_bank(n_bands: int, sample_rate: int):
    """Fourth-order mel-spaced bandpass filters plus a 30 Hz envelope lowpass."""
    edges = mel_band_edges(n_bands, sample_rate, fmin=80.0,
                           fmax=0.99 * sample_rate / 2.0)
    nyq = sample_rate / 2.0
    bandpasses = []
    for b in range(n_bands):
        lo = max(edges[b], 40.0) / nyq
        hi = min(edges[b + 2], 0.999 * nyq) / nyq
        bandpasses.append(butter(2, [lo, hi], btype="band", output="sos"))
    envelope_lp = butter(2, 30.0 / nyq, btype="low", output="sos")
    return bandpasses, envelope_lp


def nmc_features(wav: Waveform, n_coeffs: int = 40, win: float = 0.025,
                 shift: float = 0.010) -> FeatureMatrix:
    """Subband amplitude-modulation coefficients.

    Each mel-spaced subband is half-wave rectified and lowpassed at 30 Hz to
    obtain an AM envelope, which is normalized by the utterance-level subband
    power. Per frame, the log envelope energies across bands are compressed
    with a DCT to n_coeffs coefficients.
    """
    win_n = int(round(win * wav.sample_rate))
    shift_n = int(round(shift * wav.sample_rate))
    if len(wav.samples) < win_n:
        raise ValueError("waveform shorter than one analysis window")
    bandpasses, envelope_lp = _am_subband_bank(n_coeffs, wav.sample_rate)

    energies = []
    for sos in bandpasses:
        sub = sosfilt(sos, wav.samples)
        envelope = sosfilt(envelope_lp, np.maximum(sub, 0.0))
        envelope /= np.sqrt(np.mean(np.square(sub)) + 1e-12)
        energies.append(np.mean(np.square(frame_signal(envelope, win_n, shift_n)), axis=1))
    modulation = np.log(np.maximum(np.stack(energies, axis=1), LOG_FLOOR))
    coeffs = dct(modulation, type=2, norm="ortho", axis=1)[:, :n_coeffs]
    return FeatureMatrix(coeffs, shift, FeatureLayout(n_coeffs))


def z_normalize(fm: FeatureMatrix, stats: NormStats | None = None):
    """Normalize each dimension to zero mean / unit std.

    Without stats, mean and population std are estimated from `fm` (stds
    below STD_FLOOR are floored, so constant columns map to zero) and the
    estimated stats are returned for reuse. With stats, the frozen transform
    is applied unchanged.
    """
    if stats is None:
        mean = fm.frames.mean(axis=0)
        std = np.maximum(fm.frames.std(axis=0), STD_FLOOR)
        stats = NormStats(mean, std)
    elif stats.mean.shape != (fm.dim,):
        raise ShapeError("normalization stats dimension mismatch")
    normalized = (fm.frames - stats.mean) / stats.std
    return FeatureMatrix(normalized, fm.frame_shift, fm.layout), stats


def splice_indices(n_frames: int, spec: SpliceSpec) -> np.ndarray:
    """Frame indices for splicing: shape (n_frames, width), edges replicated."""
    offsets = np.arange(-spec.left, spec.right + 1)
    return np.clip(np.arange(n_frames)[:, None] + offsets[None, :], 0, n_frames - 1)


def splice_context(fm: FeatureMatrix, spec: SpliceSpec) -> FeatureMatrix:
    """Concatenate each frame with its neighbours: row t is f[t-left .. t+right]."""
    idx = splice_indices(fm.n_frames, spec)
    spliced = fm.frames[idx].reshape(fm.n_frames, spec.width * fm.dim)
    layout = FeatureLayout(fm.layout.n_bands, fm.layout.n_streams,
                           fm.layout.context_width * spec.width)
    return FeatureMatrix(spliced, fm.frame_shift, layout)


def save_feature_matrix(path, fm: FeatureMatrix) -> None:
    """Write the flat binary format: FMX1 header + row-major float32 data."""
    header = struct.pack(
        "<4sIIIIId", _FMX_MAGIC, fm.n_frames, fm.dim,
        fm.layout.n_bands, fm.layout.n_streams, fm.layout.context_width,
        fm.frame_shift,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(fm.frames.astype("<f4").tobytes())


def load_feature_matrix(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        data = fh.read()
    head_size = struct.calcsize("<4sIIIIId")
    if len(data) < head_size or data[:4] != _FMX_MAGIC:
        raise FormatError(f"{path}: not a feature matrix file")
    _, t, d, n_bands, n_streams, context, frame_shift = struct.unpack_from(
        "<4sIIIIId", data, 0)
    expected = head_size + 4 * t * d
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    frames = np.frombuffer(data, dtype="<f4", offset=head_size).reshape(t, d)
    return FeatureMatrix(frames.astype(np.float64), frame_shift,
                         FeatureLayout(n_bands, n_streams, context))
