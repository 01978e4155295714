"""Input validation helpers and exception types shared across the package."""

from __future__ import annotations

import numbers

import numpy as np


class ConfigurationError(ValueError):
    """An experiment description violates one of its invariants."""


class DegeneracyError(ValueError):
    """Two levels of a generic spectrum coincide to within the tie threshold."""


class DomainError(ValueError):
    """A model was evaluated outside the region where it defines a density."""


class WindowError(ValueError):
    """A requested grid does not fit inside the observation window."""


def check_positive(value, name, *, strict=True, error=ValueError):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise error(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise error(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise error(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_int(value, name, *, minimum=None, error=ValueError):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise error(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise error(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_1d(values, name, *, allow_empty=True, dtype=float):
    """Return ``values`` as a contiguous 1-D array, rejecting NaN and inf."""
    arr = np.ascontiguousarray(np.asarray(values, dtype=dtype))
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_increasing(values, name, *, strict=True):
    arr = check_1d(values, name, allow_empty=False)
    d = np.diff(arr)
    if (strict and np.any(d <= 0)) or (not strict and np.any(d < 0)):
        raise ValueError(f"{name} must be {'strictly ' if strict else ''}increasing")
    return arr
