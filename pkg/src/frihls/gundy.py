"""Half-space Brownian motion and the pairing form of the fractional integral.

A Brownian motion ``(B_t, Y_t)`` starts on the hyperplane ``y = a`` with
Lebesgue-distributed ``B_0`` and runs until ``Y`` hits 0. With ``u_f`` the
Poisson extension of ``f``, the functional

    E[ g(B_tau) int_0^tau Y_t^alpha d_y u_f(B_t, Y_t) dY_t ]

equals ``int_0^inf 2 min(y, a) y^alpha int d_y u_f d_y u_g dx dy``, which tends
to ``C_alpha <I_alpha f, g>`` as ``a -> inf``. Only ``d = 1`` is supported.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gamma as gamma_fn, gammainc, gammaincc, wofz

from ._validation import check_positive
from .errors import BudgetError, DomainError
from .fractional import fractional_pairing
from .martingale import DEFAULT_SEED
from .quadrature import log_panel_rule

STEP_BUDGET = 1_000_000
TRUNCATION_LIMIT = 1e-3
CHUNK = 1024


def _check_1d(f):
    if f.dim != 1:
        raise DomainError("the half-space pairing is implemented for d = 1")


def poisson_extension(f, x, y):
    """``u_f(x, y) = (P_y * f)(x)``; for a Gaussian term it is a Voigt
    profile, ``A Re w((x - c + i y) / (s sqrt 2))``."""
    _check_1d(f)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for amp, c, v in zip(f.amplitudes, f.centers[:, 0], f.widths2):
        z = (x - c + 1j * y) / math.sqrt(2.0 * v)
        out += amp * wofz(z).real
    return out


def poisson_extension_dy(f, x, y):
    """``d u_f / d y`` using ``w'(z) = -2 z w(z) + 2i / sqrt(pi)``."""
    _check_1d(f)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for amp, c, v in zip(f.amplitudes, f.centers[:, 0], f.widths2):
        sc = math.sqrt(2.0 * v)
        z = (x - c + 1j * y) / sc
        dw = -2.0 * z * wofz(z) + 2j / math.sqrt(math.pi)
        out -= amp * dw.imag / sc
    return out


def limit_constant(alpha):
    """``C_alpha = 2^(-1 - 3 alpha / 2) Gamma(2 + alpha)`` for ``d = 1``."""
    return 2.0 ** (-1.0 - 1.5 * alpha) * gamma_fn(2.0 + alpha)


def _fourier_product(f, g, xi):
    """``Re(f_hat(xi) conj(g_hat(xi)))`` for 1-D mixtures."""
    out = np.zeros_like(xi)
    for af, cf, vf in zip(f.amplitudes, f.centers[:, 0], f.widths2):
        for ag, cg, vg in zip(g.amplitudes, g.centers[:, 0], g.widths2):
            pref = af * ag * 2.0 * math.pi * math.sqrt(vf * vg)
            out += pref * np.exp(-0.5 * (vf + vg) * xi * xi) * np.cos(xi * (cf - cg))
    return out


def pairing_exact(f, g, alpha, a):
    """``int_0^inf 2 min(y, a) y^alpha H(y) dy`` with
    ``H(y) = (1/2pi) int xi^2 exp(-2 y |xi|) f_hat conj(g_hat) dxi``; the
    ``y`` integral is done in closed form, leaving a ``xi`` quadrature.
    ``a = inf`` gives the limit ``C_alpha <I_alpha f, g>``."""
    _check_1d(f)
    _check_1d(g)
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0, 1)")
    vmin = float(min(np.min(f.widths2), np.min(g.widths2)))
    lo, hi = 1e-14, 40.0 / math.sqrt(vmin)
    xi, w = log_panel_rule(lo, hi, 60, 16)
    x = 2.0 * xi
    if math.isinf(a):
        kern = 2.0 * gamma_fn(2.0 + alpha) * x ** (-2.0 - alpha)
    else:
        kern = 2.0 * (gamma_fn(2.0 + alpha) * gammainc(2.0 + alpha, a * x) * x ** (-2.0 - alpha)
                      + a * gamma_fn(1.0 + alpha) * gammaincc(1.0 + alpha, a * x) * x ** (-1.0 - alpha))
    body = np.sum(w * xi ** 2 * kern * _fourier_product(f, g, xi))
    # near xi = 0 the integrand is ~ 2 a xi^(1-alpha) / (2 xi)^(1+alpha) * fg(0)
    fg0 = float(_fourier_product(f, g, np.array([0.0]))[0])
    head_scale = (2.0 * gamma_fn(2.0 + alpha) * 2.0 ** (-2.0 - alpha) * lo ** (1.0 - alpha) / (1.0 - alpha)
                  if math.isinf(a) else 2.0 * a * gamma_fn(1.0 + alpha) * 2.0 ** (-1.0 - alpha) * lo ** (2.0 - alpha) / (2.0 - alpha))
    return float((body + head_scale * fg0) / math.pi)


def cauchy_lattice(N, a, L):
    """Midpoint quantiles of the Cauchy density of scale ``a`` restricted to
    ``[-L, L]``, with weights ``1 / (N p(x))`` so they still integrate
    Lebesgue measure on the box (``sum w = 2L`` up to lattice error).

    The exit point of the half-space motion is Cauchy distributed about the
    start, so distant starts reach the support of ``g`` with probability
    ``~ a / |x|``; sampling them at that rate keeps the weights balanced.
    """
    theta = math.atan(L / a)
    u = (np.arange(N) + 0.5) / N
    x = a * np.tan((2.0 * u - 1.0) * theta)
    density = 1.0 / (2.0 * a * theta * (1.0 + (x / a) ** 2))
    return x, 1.0 / (N * density)


@dataclass(frozen=True)
class PairingResult:
    a: float
    alpha: float
    N: int
    pairing_estimate: float
    std_error: float
    truncated: int
    truncated_fraction: float
    steps_mean: float
    reference: float
    exact: float

    @property
    def ratio(self):
        return self.pairing_estimate / self.reference

    @property
    def ratio_se(self):
        return self.std_error / abs(self.reference)


def _pairing_chunk(f, g, alpha, a, starts, seed, block, eps, dt_min, step_budget):
    n = starts.size
    gen = np.random.Generator(np.random.Philox(key=(seed ^ 0x6A09E667F3BCC908) & ((1 << 64) - 1),
                                               counter=[0, 0, 0, block]))
    B = starts.astype(float).copy()
    Y = np.full(n, float(a))
    acc = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    exit_x = np.zeros(n)
    while np.any(active):
        draws = gen.standard_normal((n, 2))
        unif = gen.random(n)
        idx = np.flatnonzero(active)
        y0, b0 = Y[idx], B[idx]
        dt = np.maximum(eps * eps * y0 * y0, dt_min)
        sq = np.sqrt(dt)
        y1 = y0 + sq * draws[idx, 1]
        b1 = b0 + sq * draws[idx, 0]
        h = y0 ** alpha * poisson_extension_dy(f, b0, y0)
        with np.errstate(over="ignore"):
            crossed = (y1 <= 0.0) | (unif[idx] < np.exp(-2.0 * y0 * np.maximum(y1, 0.0) / dt))
        acc[idx] += h * np.where(crossed, -y0, y1 - y0)
        steps[idx] += 1
        done = idx[crossed]
        exit_x[done] = b1[crossed]
        active[done] = False
        go = idx[~crossed]
        Y[go], B[go] = y1[~crossed], b1[~crossed]
        over = go[steps[go] >= step_budget]
        active[over] = False
        # truncated paths are excluded (their contribution is set to 0)
        acc[over] = 0.0
        exit_x[over] = np.nan
    truncated = np.isnan(exit_x)
    gval = np.where(truncated, 0.0, g(np.nan_to_num(exit_x)))
    return gval * acc, int(np.count_nonzero(truncated)), steps


def gundy_varopoulos_pairing(f, g, alpha, a, N=20_000, half_width=None, seed=DEFAULT_SEED, eps=0.05,
                             dt_min=1e-8, step_budget=STEP_BUDGET, threads=1, chunk=CHUNK):
    """Monte Carlo estimate of the half-space pairing at height ``a``.

    ``Y`` takes Gaussian steps of variance ``max(eps^2 Y^2, dt_min)``; a
    Brownian-bridge crossing test (probability ``exp(-2 Y_0 Y_1 / dt)``)
    catches hits inside a step. Starts come from :func:`cauchy_lattice` on
    ``[-L, L]`` with ``L`` default ``1000 a``. Paths still alive after
    ``step_budget`` steps are counted as truncated; more than 0.1% raises
    :class:`BudgetError`.
    """
    _check_1d(f)
    _check_1d(g)
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0, 1)")
    if N < 1:
        raise DomainError("N must be >= 1")
    a = check_positive(a, "a")
    L = 1000.0 * a if half_width is None else check_positive(half_width, "half_width")
    starts, weights = cauchy_lattice(N, a, L)
    bounds = [(lo, min(lo + chunk, N)) for lo in range(0, N, chunk)]
    job = lambda b: _pairing_chunk(f, g, alpha, a, starts[b[0]:b[1]], seed, b[0] // chunk, eps, dt_min, step_budget)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    vals = np.concatenate([p[0] for p in parts])
    truncated = sum(p[1] for p in parts)
    steps = np.concatenate([p[2] for p in parts])
    frac = truncated / N
    if frac > TRUNCATION_LIMIT:
        raise BudgetError(f"{truncated} of {N} paths exceeded the step budget", required=truncated)
    est = float(np.sum(weights * vals))
    se = math.sqrt(N) * float(np.std(weights * vals))
    ref = fractional_pairing(f, g, alpha)
    return PairingResult(a, alpha, N, est, se, truncated, frac, float(np.mean(steps)), ref,
                         pairing_exact(f, g, alpha, a))
