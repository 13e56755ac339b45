"""Recording-to-feature pipeline: burst detection, clipping, both encodings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mfcc import MfccConfig, compute_mfcc
from .recording import VibrationRecording
from .segmentation import clip_sample, detect_burst, to_primitive_feature


@dataclass(frozen=True)
class FeaturePair:
    """Both encodings of one clipped burst, plus its labels.

    primitive: (3, rows, 40) reshaped raw samples.
    mfcc: (3, n_frames, 39) cepstral coefficients with deltas.
    user is None for impostor recordings.
    """

    primitive: np.ndarray
    mfcc: np.ndarray
    gesture: str
    user: int | None

    def __post_init__(self) -> None:
        if self.primitive.ndim != 3 or self.primitive.shape[0] != 3:
            raise ValueError(f"primitive must be (3, rows, cols), got {self.primitive.shape}")
        if self.mfcc.ndim != 3 or self.mfcc.shape[0] != 3:
            raise ValueError(f"mfcc must be (3, frames, coeffs), got {self.mfcc.shape}")


def extract_features(
    recording: VibrationRecording,
    duration_ms: float,
    mfcc_config: MfccConfig | None = None,
    window_ms: float = 50.0,
    step_ms: float = 5.0,
    ratio_threshold: float = 5.0,
) -> FeaturePair:
    """Locate the vibration burst, clip it to duration_ms, encode both ways.

    Raises NoBurstFound / SegmentTooShort from the underlying stages when the
    recording has no detectable burst or the burst is shorter than requested.
    """
    segment = detect_burst(
        recording,
        window_ms=window_ms,
        step_ms=step_ms,
        ratio_threshold=ratio_threshold,
    )
    clipped = clip_sample(recording, segment, duration_ms)
    primitive = to_primitive_feature(clipped)
    mfcc = compute_mfcc(clipped, mfcc_config or MfccConfig())
    return FeaturePair(
        primitive=primitive.channels,
        mfcc=mfcc.channels,
        gesture=recording.gesture,
        user=recording.user,
    )


def stack_pairs(pairs: list[FeaturePair]) -> tuple[np.ndarray, np.ndarray]:
    """Stack uniform FeaturePairs into (primitive, mfcc) batch tensors."""
    if not pairs:
        raise ValueError("cannot stack an empty feature list")
    primitive = np.stack([p.primitive for p in pairs])
    mfcc = np.stack([p.mfcc for p in pairs])
    return primitive, mfcc


def featurize_recordings(
    recordings: list[VibrationRecording],
    duration_ms: float,
    mfcc_config: MfccConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, list[int | None], list[str]]:
    """Extract both encodings from every recording.

    Returns (primitive, mfcc, users, gestures) with the batch tensors
    stacked in input order.
    """
    pairs = [extract_features(rec, duration_ms, mfcc_config) for rec in recordings]
    primitive, mfcc = stack_pairs(pairs)
    return primitive, mfcc, [p.user for p in pairs], [p.gesture for p in pairs]
