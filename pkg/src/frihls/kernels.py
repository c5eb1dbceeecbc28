"""Closed-form kernels: heat, heat gradient, Riesz and Poisson.

Everything here is a pure function of its arguments. Radial kernels take a
distance ``r`` (scalar or array) and broadcast.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

from ._validation import check_alpha, check_dim, check_points, check_positive, squeeze
from .errors import DomainError, SingularityError

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class HeatKernelSpec:
    """Gaussian kernel ``(2 pi sigma^2 t)^(-d/2) exp(-r^2 / (2 sigma^2 t))``.

    ``sigma=1`` is the Brownian normalization (generator ``Delta/2``),
    ``sigma=sqrt(2)`` the analyst's one (generator ``Delta``).
    """

    sigma: float = 1.0
    dim: int = 1

    def __post_init__(self):
        check_positive(self.sigma, "sigma")
        check_dim(self.dim)


@dataclass(frozen=True)
class RieszKernelSpec:
    alpha: float
    dim: int

    def __post_init__(self):
        check_dim(self.dim)
        check_alpha(self.alpha, self.dim)

    @property
    def constant(self):
        """Prefactor ``c`` in ``R(r) = c / r^(d - alpha)``."""
        return riesz_constant(self.alpha, self.dim)


def _flush(values):
    # values below the smallest normal are returned as exact zeros
    values = np.asarray(values, dtype=float)
    return np.where(values < _TINY, 0.0, values)


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise DomainError("heat kernel time must be > 0")
    return t


def heat_kernel(spec, r, t):
    """Heat kernel value at distance ``r`` and time ``t`` (broadcasting)."""
    t = _check_time(t)
    r = np.asarray(r, dtype=float)
    var = spec.sigma ** 2 * t
    log_val = -0.5 * spec.dim * np.log(2.0 * np.pi * var) - r * r / (2.0 * var)
    with np.errstate(under="ignore"):
        out = _flush(np.exp(log_val))
    return float(out) if out.ndim == 0 else out


def log_heat_kernel(spec, r, t):
    t = _check_time(t)
    r = np.asarray(r, dtype=float)
    var = spec.sigma ** 2 * t
    return -0.5 * spec.dim * np.log(2.0 * np.pi * var) - r * r / (2.0 * var)


def grad_heat_kernel(spec, x, t):
    """Gradient ``-(x/t) k_t(x)`` of the Brownian (sigma = 1) heat kernel."""
    if spec.sigma != 1.0:
        raise DomainError("grad_heat_kernel is defined for sigma = 1")
    t = float(_check_time(t))
    pts, single = check_points(x, spec.dim)
    r = np.linalg.norm(pts, axis=1)
    k = heat_kernel(spec, r, t)
    grad = -(pts / t) * np.asarray(k)[:, None]
    return grad[0] if single else grad


def grad_bound_margin(spec, x, t):
    """Ratio ``|grad k_t(x)| / (2^((d+4)/2) t^(-1/2) k_2t(x))``; never exceeds 1.

    The ratio is formed in log space, so it stays finite where both kernels
    underflow.
    """
    if spec.sigma != 1.0:
        raise DomainError("grad_bound_margin is defined for sigma = 1")
    t = float(_check_time(t))
    pts, single = check_points(x, spec.dim)
    r = np.linalg.norm(pts, axis=1)
    d = spec.dim
    with np.errstate(divide="ignore"):
        log_num = np.log(r / t) + log_heat_kernel(spec, r, t)
    log_den = 0.5 * (d + 4) * math.log(2.0) - 0.5 * math.log(t) + log_heat_kernel(spec, r, 2.0 * t)
    with np.errstate(under="ignore"):
        margin = np.exp(log_num - log_den)
    return squeeze(margin, single)


def riesz_constant(alpha, dim):
    """``Gamma((d-alpha)/2) / (Gamma(alpha/2) 2^(alpha/2) pi^(d/2))``."""
    return math.exp(
        gammaln((dim - alpha) / 2.0)
        - gammaln(alpha / 2.0)
        - 0.5 * alpha * math.log(2.0)
        - 0.5 * dim * math.log(math.pi)
    )


def riesz_kernel(spec, r):
    r = np.asarray(r, dtype=float)
    if np.any(r == 0):
        raise SingularityError("the Riesz kernel is singular at r = 0")
    if np.any(r < 0) or np.any(~np.isfinite(r)):
        raise DomainError("distance must be a positive finite number")
    out = spec.constant * r ** (spec.alpha - spec.dim)
    return float(out) if out.ndim == 0 else out


def poisson_kernel(d, y, r):
    """Half-space Poisson kernel ``Gamma((d+1)/2) pi^(-(d+1)/2) y / (y^2 + r^2)^((d+1)/2)``."""
    check_dim(d)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(~np.isfinite(y)):
        raise DomainError("Poisson kernel height y must be > 0")
    r = np.asarray(r, dtype=float)
    c = math.exp(gammaln((d + 1) / 2.0) - 0.5 * (d + 1) * math.log(math.pi))
    out = c * y / (y * y + r * r) ** ((d + 1) / 2.0)
    return float(out) if out.ndim == 0 else out
