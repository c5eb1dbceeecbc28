"""Small input-checking helpers in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .errors import DomainError


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise DomainError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise DomainError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_dim(dim, max_dim=None):
    if isinstance(dim, bool) or not isinstance(dim, numbers.Integral) or dim < 1:
        raise DomainError(f"dim must be a positive integer, got {dim!r}")
    if max_dim is not None and dim > max_dim:
        raise DomainError(f"dim must be <= {max_dim}, got {dim}")
    return int(dim)


def check_alpha(alpha, dim):
    alpha = float(alpha)
    if not (0.0 < alpha < dim):
        raise DomainError(f"alpha must lie in (0, {dim}), got {alpha}")
    return alpha


def check_points(x, dim):
    """Coerce ``x`` to a float array of shape ``(m, dim)``.

    Returns the array together with a flag telling whether the caller passed
    a single point, so results can be squeezed back to a scalar.
    """
    arr = np.asarray(x, dtype=float)
    if dim == 1 and arr.ndim <= 1:
        single = arr.ndim == 0
        arr = arr.reshape(-1, 1)
        return arr, single
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise DomainError(f"point has {arr.shape[0]} coordinates, expected {dim}")
        return arr.reshape(1, dim), True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DomainError(f"points must have shape (m, {dim}), got {arr.shape}")
    return arr, False


def squeeze(values, single):
    values = np.asarray(values)
    return float(values.reshape(-1)[0]) if single else values
