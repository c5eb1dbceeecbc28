"""Quadrature building blocks: Gauss-Legendre panels, sphere rules, and
radial L^q norms with power-law tail extrapolation."""

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, i0e, ive

from .errors import AccuracyError


@lru_cache(maxsize=64)
def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges, n):
    """Composite Gauss-Legendre rule with ``n`` nodes on each panel."""
    edges = np.asarray(edges, dtype=float)
    x, w = _gl(n)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def log_panel_rule(lo, hi, n_panels, n, split=None):
    """Gauss-Legendre in ``u = log t`` on log-spaced panels; returns nodes in
    ``t`` and weights for ``int g(t) dt`` (the Jacobian ``t`` is included).

    With ``split`` the range is cut there and both sides receive
    ``n_panels`` panels.
    """
    if split is not None and lo < split < hi:
        t1, w1 = log_panel_rule(lo, split, n_panels, n)
        t2, w2 = log_panel_rule(split, hi, n_panels, n)
        return np.concatenate([t1, t2]), np.concatenate([w1, w2])
    edges = np.linspace(math.log(lo), math.log(hi), n_panels + 1)
    u, w = panel_rule(edges, n)
    t = np.exp(u)
    return t, w * t


def sphere_area(d):
    return 2.0 * math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d))


@lru_cache(maxsize=32)
def sphere_rule(d, n):
    """Directions and weights on the unit sphere ``S^{d-1}`` (weights sum to
    its area). ``n`` controls the resolution per angle."""
    if d == 1:
        dirs, w = np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    elif d == 2:
        th = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        w = np.full(n, 2.0 * np.pi / n)
    elif d == 3:
        mu, wmu = _gl(max(2, n // 2))
        n_phi = n
        phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        st = np.sqrt(1.0 - mu ** 2)
        dirs = np.stack(
            [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(mu, n_phi)],
            axis=1,
        )
        w = np.outer(wmu, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
    else:
        raise ValueError("sphere rules are provided for d <= 3")
    dirs.setflags(write=False)
    w.setflags(write=False)
    return dirs, w


def radial_lq_integral(func, center, d, q, r_core, r_max, n_dirs=1, panels=24, n=12,
                       exponent_tol=0.05, expected_exponent=None):
    """``int |func(x)|^q dx`` over R^d in polar coordinates about ``center``.

    The radial range ``[0, r_max]`` gets a uniform section over ``[0, r_core]``
    followed by log-spaced panels; beyond ``r_max`` the integrand is continued
    as a power law whose exponent is fitted from the values at ``r_max/2`` and
    ``r_max`` in every direction. The fit is validated against
    ``expected_exponent`` when given.

    Returns ``(value, tail_fraction, fitted_exponent)``.
    """
    dirs, wdir = sphere_rule(d, n_dirs)
    if n_dirs == 1 and d > 1:
        # radially symmetric integrand: one direction carries the whole sphere
        dirs = np.eye(d)[:1]
        wdir = np.array([sphere_area(d)])
    center = np.asarray(center, dtype=float).reshape(1, d)
    n_core = max(4, panels // 3)
    core_edges = np.linspace(0.0, r_core, n_core + 1)
    outer_edges = np.geomspace(r_core, r_max, panels - n_core + 1)
    r, wr = panel_rule(np.concatenate([core_edges, outer_edges[1:]]), n)
    pts = center + (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    vals = np.abs(np.asarray(func(pts), dtype=float)).reshape(r.size, dirs.shape[0])
    body = float(np.sum((wr * r ** (d - 1))[:, None] * wdir[None, :] * vals ** q))

    probe = center + np.concatenate([0.5 * r_max * dirs, r_max * dirs])
    pv = np.abs(np.asarray(func(probe), dtype=float)).reshape(2, dirs.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.log(pv[1] / pv[0]) / math.log(2.0)
    slopes = np.where(np.isfinite(slopes), slopes, -np.inf)
    gamma = float(np.max(slopes))
    if expected_exponent is not None and np.isfinite(gamma) and abs(gamma - expected_exponent) > exponent_tol:
        raise AccuracyError(
            f"far-field exponent {gamma:.4f} differs from the expected {expected_exponent:.4f}",
            estimates=(gamma, expected_exponent),
        )
    tail = 0.0
    if np.isfinite(gamma):
        decay = gamma * q + d
        if decay >= 0:
            raise AccuracyError(f"tail |f|^q ~ r^{decay - d:.3f} is not integrable", estimates=(gamma,))
        tail = float(np.sum(wdir * pv[1] ** q) * r_max ** d / (-decay))
    total = body + tail
    return total, (tail / total if total > 0 else 0.0), gamma


def _ive(nu, u):
    # scipy's ive returns nan for u beyond about 1e9; use the asymptotic series there
    out = ive(nu, u)
    big = ~np.isfinite(out) & (np.asarray(u) > 1e6)
    if np.any(big):
        ub = np.asarray(u, dtype=float)[big] if np.ndim(out) else float(u)
        mu = 4.0 * nu * nu
        series = 1.0 - (mu - 1.0) / (8.0 * ub) + (mu - 1.0) * (mu - 9.0) / (2.0 * (8.0 * ub) ** 2)
        if np.ndim(out):
            out = np.array(out, dtype=float)
            out[big] = series / np.sqrt(2.0 * np.pi * ub)
        else:
            out = series / math.sqrt(2.0 * math.pi * ub)
    return out


def gaussian_spherical_mean(d, rho, r, v):
    """``int_{S^{d-1}} exp(-|z - r w|^2 / (2v)) dw`` with ``|z| = rho``."""
    base = np.exp(-((rho - r) ** 2) / (2.0 * v))
    u = rho * r / v
    if d == 1:
        return base * (1.0 + np.exp(-2.0 * u))
    if d == 2:
        return 2.0 * np.pi * base * i0e(u)
    if d == 3:
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(u > 1e-8, -np.expm1(-2.0 * u) / (2.0 * np.where(u > 0, u, 1.0)), 1.0 - u)
        return 4.0 * np.pi * base * ratio
    nu = d / 2.0 - 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        bes = np.where(u > 1e-8, math.exp(gammaln(d / 2.0)) * (2.0 / np.where(u > 0, u, 1.0)) ** nu * _ive(nu, u), 1.0)
    return sphere_area(d) * base * bes
