"""Small input validation helpers."""

from __future__ import annotations

import numpy as np

from .errors import DomainError


def as_points(x, dim=None, name="points"):
    """Return ``x`` as a float array of shape ``(n, d)``.

    A 1-D input is read as ``n`` points on the line when ``dim`` is 1 or
    None, and as a single point otherwise.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if dim is None or dim == 1:
            arr = arr[:, None]
        else:
            arr = arr[None, :]
    if arr.ndim != 2:
        raise DomainError(f"{name} must be a 2-D array of shape (n, d)")
    if dim is not None and arr.shape[1] != dim:
        raise DomainError(f"{name} has dimension {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def as_matrix(a, dim=None, name="matrix"):
    """Return ``a`` as a finite square float matrix."""
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.shape[0] != arr.shape[1]:
        raise DomainError(f"{name} must be square, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DomainError(f"{name} must be {dim}x{dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name):
    """Raise unless ``value`` is a finite positive number."""
    v = float(value)
    if not np.isfinite(v) or v <= 0:
        raise DomainError(f"{name} must be positive, got {value!r}")
    return v


def as_signals(x, n_features, name="X"):
    """Return ``x`` as a complex array of shape ``(n_samples, n_features)``.

    ``sklearn.utils.check_array`` rejects complex input, so frequency
    samples are validated here instead.
    """
    arr = np.asarray(x)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DomainError(f"{name} must be 2-D (n_samples, n_features)")
    if arr.shape[1] != n_features:
        raise DomainError(f"{name} has {arr.shape[1]} features, expected {n_features}")
    arr = arr.astype(complex)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr
