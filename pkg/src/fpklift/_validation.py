"""Input validation helpers shared by the public API."""

import numbers

import numpy as np

from .exceptions import InvalidArgumentError


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise InvalidArgumentError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise InvalidArgumentError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise InvalidArgumentError(f"{name} must be >= 0, got {value!r}")
    return value


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise InvalidArgumentError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_points(x, d=None, name="x"):
    """Coerce to a float array of shape (n, d); a single point may be passed as shape (d,)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if d is None or arr.shape[0] == d else arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise InvalidArgumentError(f"{name} has dimension {arr.shape[1]}, expected {d}")
    return arr


def check_same_dim(a, b):
    if a.dim != b.dim:
        raise InvalidArgumentError(f"dimension mismatch: {a.dim} != {b.dim}")
