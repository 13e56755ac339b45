"""Input validation helpers shared across the pipeline."""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch


def as_float_array(x, name: str = "array") -> np.ndarray:
    """Coerce to a contiguous float64 array, rejecting non-finite values."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_tensor4(x, name: str = "tensor") -> np.ndarray:
    """Validate a (batch, channels, height, width) activation tensor."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ShapeMismatch(f"{name} must be 4-dimensional, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ShapeMismatch(f"{name} has a zero-sized dimension: {arr.shape}")
    return arr


def check_positive(value, name: str):
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_probability(value, name: str):
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {value!r}")
    return value
