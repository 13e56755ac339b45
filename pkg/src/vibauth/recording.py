"""Raw 3-axis vibration recordings and their on-disk CSV form.

A recording is the unprocessed accelerometer stream: three equal-length
axis traces at a fixed sample rate, optionally tagged with the gesture
taken during capture and the wearer's identity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import VibauthError
from .validation import as_float_array, check_positive

GESTURES = (
    "Standing",
    "SittingUpright",
    "SittingLeanForward",
    "SittingLeanBackward",
    "Walking",
)

#: Label value marking a recording from an unregistered person.
IMPOSTOR = "impostor"


@dataclass(frozen=True)
class VibrationRecording:
    """Timestamped 3-axis acceleration stream at a fixed sample rate.

    user is None for recordings from people outside the enrolled set.
    """

    sample_rate_hz: float
    axes: np.ndarray  # shape (3, n_samples)
    gesture: str | None = None
    user: int | None = None

    def __post_init__(self):
        check_positive(self.sample_rate_hz, "sample_rate_hz")
        axes = as_float_array(self.axes, "axes").copy()
        if axes.ndim != 2 or axes.shape[0] != 3:
            raise ValueError(f"axes must have shape (3, n), got {axes.shape}")
        if axes.shape[1] < 1:
            raise ValueError("axes must contain at least one sample")
        if self.gesture is not None and self.gesture not in GESTURES:
            raise ValueError(f"unknown gesture {self.gesture!r}")
        axes.setflags(write=False)
        object.__setattr__(self, "axes", axes)

    @property
    def n_samples(self) -> int:
        return self.axes.shape[1]

    @property
    def duration_ms(self) -> float:
        return self.n_samples * 1000.0 / self.sample_rate_hz

    def with_axes(self, axes: np.ndarray) -> "VibrationRecording":
        """Copy of this recording with new axis data, labels preserved."""
        return replace(self, axes=axes)


@dataclass(frozen=True)
class BurstSegment:
    """Half-open sample-index range [start, end) locating the vibration impulse."""

    start_index: int
    end_index: int
    sample_rate_hz: float

    def __post_init__(self):
        if not 0 <= self.start_index < self.end_index:
            raise ValueError(
                f"invalid segment [{self.start_index}, {self.end_index})"
            )

    @property
    def n_samples(self) -> int:
        return self.end_index - self.start_index

    @property
    def duration_ms(self) -> float:
        return self.n_samples * 1000.0 / self.sample_rate_hz


def _format_value(v: float) -> str:
    # 9 significant digits: enough for a stable write->read->write fixed point.
    return format(float(v), ".9g")


def write_recording_csv(path: str | Path, recording: VibrationRecording) -> None:
    """Write a recording in the plain-text CSV interchange format.

    Layout: header line ``sample_rate_hz,<rate>``, one ``x,y,z`` row per
    sample, then optional trailing ``gesture,<name>`` / ``user,<id>`` lines,
    where the id of an unenrolled wearer is written as ``impostor``.
    """
    lines = [f"sample_rate_hz,{_format_value(recording.sample_rate_hz)}"]
    x, y, z = recording.axes
    for i in range(recording.n_samples):
        lines.append(f"{_format_value(x[i])},{_format_value(y[i])},{_format_value(z[i])}")
    if recording.gesture is not None:
        lines.append(f"gesture,{recording.gesture}")
    lines.append(f"user,{IMPOSTOR if recording.user is None else recording.user}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_recording_csv(path: str | Path) -> VibrationRecording:
    """Parse a recording written by :func:`write_recording_csv`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise VibauthError(f"cannot read recording {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise VibauthError(f"{path}: empty recording file")
    header = lines[0].split(",")
    if len(header) != 2 or header[0] != "sample_rate_hz":
        raise VibauthError(f"{path}: missing sample_rate_hz header")
    try:
        sample_rate = float(header[1])
    except ValueError as exc:
        raise VibauthError(f"{path}: bad sample rate {header[1]!r}") from exc

    rows: list[tuple[float, float, float]] = []
    gesture: str | None = None
    user: int | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if fields[0] == "gesture":
            gesture = fields[1]
            continue
        if fields[0] == "user":
            try:
                user = None if fields[1] == IMPOSTOR else int(fields[1])
            except ValueError as exc:
                raise VibauthError(f"{path}:{lineno}: bad user id {fields[1]!r}") from exc
            continue
        if len(fields) != 3:
            raise VibauthError(f"{path}:{lineno}: expected 3 values, got {len(fields)}")
        try:
            rows.append((float(fields[0]), float(fields[1]), float(fields[2])))
        except ValueError as exc:
            raise VibauthError(f"{path}:{lineno}: bad sample value") from exc
    if not rows:
        raise VibauthError(f"{path}: no samples")
    axes = np.array(rows, dtype=np.float64).T
    return VibrationRecording(sample_rate_hz=sample_rate, axes=axes, gesture=gesture, user=user)
