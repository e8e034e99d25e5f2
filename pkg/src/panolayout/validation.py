"""Shared input validation helpers.

All validators raise ``ValueError`` with a message naming the violated
constraint and, for per-column checks, the first offending index.
"""
from __future__ import annotations

import numpy as np


def as_float_vector(values, name: str, length: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-D float64 array, copying the input."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"{name} has non-finite value at index {bad}")
    return arr


def check_positive(arr: np.ndarray, name: str) -> None:
    if np.any(arr <= 0):
        bad = int(np.flatnonzero(arr <= 0)[0])
        raise ValueError(f"{name} must be strictly positive; {name}[{bad}] = {arr[bad]}")


def check_same_length(a: np.ndarray, b: np.ndarray, a_name: str, b_name: str) -> None:
    if a.shape[0] != b.shape[0]:
        raise ValueError(
            f"{a_name} and {b_name} must have equal length, "
            f"got {a.shape[0]} vs {b.shape[0]}"
        )


def check_scalar(value, name: str, *, minimum: float | None = None,
                 maximum: float | None = None, strict_min: bool = False) -> float:
    """Validate a finite scalar, optionally against an interval."""
    x = float(value)
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if minimum is not None:
        if strict_min and x <= minimum:
            raise ValueError(f"{name} must be > {minimum}, got {x}")
        if not strict_min and x < minimum:
            raise ValueError(f"{name} must be >= {minimum}, got {x}")
    if maximum is not None and x > maximum:
        raise ValueError(f"{name} must be <= {maximum}, got {x}")
    return x


def frozen_array(arr: np.ndarray) -> np.ndarray:
    """Return a read-only copy, for arrays stored on immutable value types."""
    out = np.array(arr, dtype=np.float64)
    out.flags.writeable = False
    return out
