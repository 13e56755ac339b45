"""Burst synchronization and primitive feature layout.

The vibration impulse sits somewhere inside a longer sensor stream. It is
located by sliding a short window over the acceleration-magnitude signal
and thresholding the window variance against a leading-silence baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyInput, NoBurstFound, RecordingTooShort, SegmentTooShort
from .recording import BurstSegment, VibrationRecording

#: Fixed column count of the primitive feature matrix.
PRIMITIVE_COLUMNS = 40

#: Window variances are compared against the median of this many leading windows.
BASELINE_WINDOWS = 10


@dataclass(frozen=True)
class PrimitiveFeature:
    """Raw clipped samples reshaped row-major into (rows, 40) per axis."""

    channels: np.ndarray  # shape (3, rows, 40)
    duration_ms: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[1], self.channels.shape[2]


def _window_variances(magnitude: np.ndarray, window_len: int, step: int) -> np.ndarray:
    windows = sliding_window_view(magnitude, window_len)[::step]
    return windows.var(axis=1)


def detect_burst(
    recording: VibrationRecording,
    window_ms: float = 50.0,
    step_ms: float = 5.0,
    ratio_threshold: float = 5.0,
) -> BurstSegment:
    """Locate the vibration impulse via short-time variance of the magnitude.

    The magnitude signal sqrt(x^2 + y^2 + z^2) is scanned with a sliding
    window; windows whose variance exceeds ``ratio_threshold`` times the
    baseline (median variance of the first windows) mark the burst. When
    several runs qualify, the longest wins, earliest start breaking ties.

    Boundary snapping: the burst enters a window near that window's trailing
    edge, so the start is the first above-threshold window's end minus one
    step; the end keeps the full extent of the last above-threshold window
    so a subsequent fixed-length clip retains the whole impulse.
    """
    fs = recording.sample_rate_hz
    window_len = int(round(window_ms * fs / 1000.0))
    step = int(round(step_ms * fs / 1000.0))
    if window_len < 2 or step < 1:
        raise ValueError("window and step must span at least 2 and 1 samples")
    n = recording.n_samples
    if n < window_len + step:
        raise RecordingTooShort(
            f"{n} samples cannot fit two {window_ms} ms windows stepped {step_ms} ms"
        )

    magnitude = np.sqrt(np.sum(recording.axes**2, axis=0))
    variances = _window_variances(magnitude, window_len, step)
    baseline = float(np.median(variances[: min(BASELINE_WINDOWS, len(variances))]))
    above = variances > ratio_threshold * baseline
    if not above.any():
        raise NoBurstFound("no window variance exceeded the threshold")

    # Longest contiguous run of above-threshold windows, earliest on ties.
    best_start = best_len = -1
    run_start = None
    padded = np.concatenate([above, [False]])
    for i, flag in enumerate(padded):
        if flag and run_start is None:
            run_start = i
        elif not flag and run_start is not None:
            run_len = i - run_start
            if run_len > best_len:
                best_start, best_len = run_start, run_len
            run_start = None
    first = best_start
    last = best_start + best_len - 1

    start = first * step + window_len - step
    end = min(n, last * step + window_len)
    return BurstSegment(start_index=start, end_index=end, sample_rate_hz=fs)


def clip_sample(
    recording: VibrationRecording, segment: BurstSegment, duration_ms: float
) -> VibrationRecording:
    """Return the first ``duration_ms`` of the segment, labels preserved."""
    fs = recording.sample_rate_hz
    n_clip = int(round(duration_ms * fs / 1000.0))
    if n_clip < 1:
        raise ValueError("clip duration must be positive")
    if segment.n_samples < n_clip:
        raise SegmentTooShort(
            f"segment of {segment.duration_ms:.1f} ms cannot supply {duration_ms} ms"
        )
    start = segment.start_index
    return recording.with_axes(recording.axes[:, start : start + n_clip])


def to_primitive_feature(clipped: VibrationRecording) -> PrimitiveFeature:
    """Reshape each axis row-major into (rows, 40), truncating the remainder.

    Row r holds samples [40r, 40r + 40); a 1 s clip at 2 kHz yields three
    50 x 40 matrices.
    """
    n = clipped.n_samples
    rows = n // PRIMITIVE_COLUMNS
    if rows < 1:
        raise EmptyInput(f"need at least {PRIMITIVE_COLUMNS} samples, got {n}")
    kept = rows * PRIMITIVE_COLUMNS
    channels = clipped.axes[:, :kept].reshape(3, rows, PRIMITIVE_COLUMNS).copy()
    return PrimitiveFeature(channels=channels, duration_ms=clipped.duration_ms)
