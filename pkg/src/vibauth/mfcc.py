"""Mel-frequency cepstral features for vibration signals.

Each axis of a clipped burst is framed with a Hamming window, mapped to a
mel filterbank power spectrum, and decorrelated with a DCT. Per frame the
feature is 39-dimensional: 12 cepstra, log frame energy, and their first
and second temporal regression derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft

from .errors import BadRange, InputTooShort
from .recording import VibrationRecording
from .validation import check_positive

#: Filterbank energies and frame energies are clamped here before the log,
#: so silent frames stay finite.
LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class MfccConfig:
    """Framing and filterbank parameters for MFCC extraction."""

    frame_ms: float = 25.0
    hop_ms: float = 10.0
    n_filterbanks: int = 40
    n_cepstra: int = 12
    include_energy: bool = True
    delta_window: int = 2
    fmin_hz: float = 0.0
    fmax_hz: float | None = None  # None means Nyquist

    def __post_init__(self):
        check_positive(self.hop_ms, "hop_ms")
        if self.frame_ms <= self.hop_ms:
            raise ValueError("frame_ms must exceed hop_ms")
        if self.n_cepstra >= self.n_filterbanks:
            raise ValueError("n_cepstra must be smaller than n_filterbanks")
        check_positive(self.delta_window, "delta_window")

    def frame_len(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_ms * sample_rate_hz / 1000.0))

    def hop_len(self, sample_rate_hz: int) -> int:
        return int(round(self.hop_ms * sample_rate_hz / 1000.0))

    def n_fft(self, sample_rate_hz: int) -> int:
        n = 1
        while n < self.frame_len(sample_rate_hz):
            n *= 2
        return n

    def resolved_fmax(self, sample_rate_hz: int) -> float:
        return sample_rate_hz / 2.0 if self.fmax_hz is None else self.fmax_hz

    @property
    def n_coefficients(self) -> int:
        statics = self.n_cepstra + (1 if self.include_energy else 0)
        return 3 * statics


@dataclass(frozen=True)
class MfccFeature:
    """Per-axis (n_frames, 39) coefficient matrices for one clipped burst."""

    channels: np.ndarray  # shape (3, n_frames, n_coefficients)

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[1], self.channels.shape[2]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def frame_signal(axis_samples: np.ndarray, sample_rate_hz: int, config: MfccConfig) -> np.ndarray:
    """Slice a signal into Hamming-windowed frames, shape (n_frames, frame_len)."""
    x = np.asarray(axis_samples, dtype=np.float64)
    frame_len = config.frame_len(sample_rate_hz)
    hop = config.hop_len(sample_rate_hz)
    if x.shape[-1] < frame_len:
        raise InputTooShort(f"{x.shape[-1]} samples < one {frame_len}-sample frame")
    n_frames = (x.shape[-1] - frame_len) // hop + 1
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx] * np.hamming(frame_len)


def mel_filterbank(sample_rate_hz: int, n_fft: int, config: MfccConfig) -> np.ndarray:
    """Triangular mel filters over rfft bins, shape (n_filterbanks, n_fft//2 + 1).

    Peaks are spaced uniformly on the mel scale between fmin and fmax;
    triangle weights are evaluated in mel space at each bin's frequency.
    """
    fmin = config.fmin_hz
    fmax = config.resolved_fmax(sample_rate_hz)
    nyquist = sample_rate_hz / 2.0
    if fmin >= fmax:
        raise BadRange(f"fmin {fmin} must be below fmax {fmax}")
    if fmax > nyquist:
        raise BadRange(f"fmax {fmax} exceeds the Nyquist frequency {nyquist}")
    if n_fft < config.frame_len(sample_rate_hz):
        raise ValueError("n_fft must be at least the frame length")

    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), config.n_filterbanks + 2)
    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft
    bin_mels = hz_to_mel(bin_freqs)

    left = mel_points[:-2, None]
    peak = mel_points[1:-1, None]
    right = mel_points[2:, None]
    rising = (bin_mels[None, :] - left) / (peak - left)
    falling = (right - bin_mels[None, :]) / (right - peak)
    return np.maximum(0.0, np.minimum(rising, falling))


def filter_peak_frequencies(sample_rate_hz: int, config: MfccConfig) -> np.ndarray:
    """Center (peak) frequency in Hz of each filterbank triangle."""
    fmin = config.fmin_hz
    fmax = config.resolved_fmax(sample_rate_hz)
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), config.n_filterbanks + 2)
    return mel_to_hz(mel_points[1:-1])


def filter_edge_frequencies(sample_rate_hz: int, config: MfccConfig) -> np.ndarray:
    """(n_filterbanks, 2) left/right edge of each triangle in Hz."""
    fmin = config.fmin_hz
    fmax = config.resolved_fmax(sample_rate_hz)
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), config.n_filterbanks + 2)
    hz = mel_to_hz(mel_points)
    return np.stack([hz[:-2], hz[2:]], axis=1)


def delta_coefficients(features: np.ndarray, window: int) -> np.ndarray:
    """Temporal regression derivative along axis 0, edge frames replicated.

    d_t = sum_{m=1..M} m * (c_{t+m} - c_{t-m}) / (2 * sum_{m=1..M} m^2)
    """
    n = features.shape[0]
    padded = np.concatenate(
        [np.repeat(features[:1], window, axis=0), features, np.repeat(features[-1:], window, axis=0)]
    )
    denom = 2.0 * sum(m * m for m in range(1, window + 1))
    out = np.zeros_like(features)
    for m in range(1, window + 1):
        out += m * (padded[window + m : window + m + n] - padded[window - m : window - m + n])
    return out / denom


def compute_mfcc(clipped: VibrationRecording, config: MfccConfig | None = None) -> MfccFeature:
    """Extract per-axis MFCC matrices from a clipped burst recording."""
    config = config or MfccConfig()
    fs = clipped.sample_rate_hz
    n_fft = config.n_fft(fs)
    fb = mel_filterbank(fs, n_fft, config)

    channels = []
    for axis in clipped.axes:
        frames = frame_signal(axis, fs, config)
        spectrum = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
        energies = np.maximum(spectrum @ fb.T, LOG_FLOOR)
        log_energies = np.log(energies)
        cepstra = scipy.fft.dct(log_energies, type=2, norm="ortho", axis=1)
        statics = cepstra[:, 1 : config.n_cepstra + 1]
        if config.include_energy:
            frame_energy = np.maximum(np.sum(frames**2, axis=1), LOG_FLOOR)
            statics = np.column_stack([statics, np.log(frame_energy)])
        deltas = delta_coefficients(statics, config.delta_window)
        delta_deltas = delta_coefficients(deltas, config.delta_window)
        channels.append(np.column_stack([statics, deltas, delta_deltas]))
    return MfccFeature(channels=np.stack(channels))


def write_feature_csv(matrix: np.ndarray, path: str | Path) -> None:
    """Dump a 2-D coefficient matrix as CSV at 9 significant digits."""
    lines = [",".join(format(float(v), ".9g") for v in row) for row in np.atleast_2d(matrix)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_feature_csv(path: str | Path) -> np.ndarray:
    rows = [
        [float(v) for v in line.split(",")]
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
    return np.array(rows, dtype=np.float64)
