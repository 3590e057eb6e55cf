"""Input validation helpers."""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidArgumentError

PROB_TOL = 1e-12


def as_points(points, dim: int | None = None, name: str = "points") -> np.ndarray:
    """Return ``points`` as a float (n, dim) array, promoting 1-D input to one point per row."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InvalidArgumentError(f"{name} must have dimension {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def as_point(z, dim: int | None = None, name: str = "point") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(z, dtype=float))
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidArgumentError(f"{name} must have dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def check_probability(p, size: int | None = None, name: str = "weights", tol: float = PROB_TOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array.

    Entries within ``tol`` below zero are clipped; the sum must be 1 within ``tol``
    (scaled by the vector length to absorb accumulation error).
    """
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a vector, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise InvalidArgumentError(f"{name} must have length {size}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if np.any(arr < -tol):
        raise InvalidArgumentError(f"{name} has negative entries: {arr.min()}")
    total = arr.sum()
    if abs(total - 1.0) > tol * max(1, arr.shape[0]):
        raise InvalidArgumentError(f"{name} must sum to 1, got {total!r}")
    return np.clip(arr, 0.0, None)


def check_positive_int(value, name: str) -> int:
    if int(value) != value or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
