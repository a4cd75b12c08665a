"""Small argument checkers used at public entry points."""

from __future__ import annotations

import math
from numbers import Integral

import numpy as np

from .errors import DomainError


def check_dimension(n) -> int:
    if isinstance(n, bool) or not isinstance(n, (Integral, np.integer)) or n < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {n!r}")
    return int(n)


def check_curvature(k) -> float:
    k = float(k)
    if not math.isfinite(k) or k < 0:
        raise DomainError(f"curvature magnitude must be finite and >= 0, got {k}")
    return k


def check_positive(value, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be finite and > 0, got {value}")
    return value


def as_vector(x, name: str = "vector", dim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DomainError(f"{name} must have length {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr
