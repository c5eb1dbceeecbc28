"""Space-time Brownian motion under a (boxed) Lebesgue start, the martingale
transforms ``M_f^a`` and ``M_f^{a,alpha}``, and the inequality checks built on
them.

With ``tau = a - s`` the time to go, the transforms are the left-point sums

    M_f^a(a)       = sum_k grad(T_tau_k f)(B_k) . dB_k
    M_f^{a,a}(a)   = sum_k tau_k^(alpha/2) grad(T_tau_k f)(B_k) . dB_k

with ``T`` the ``sigma = 1`` heat semigroup. Expectations are Lebesgue
integrals over the start box, estimated by ``sum_i w_i X_i``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfcinv, gamma as gamma_fn

from ._validation import check_alpha, check_dim, check_positive
from .errors import BudgetError, DomainError
from .mixture import GaussianMixture
from .quadrature import log_panel_rule
from .regression import NadarayaWatson
from .semigroup import ultracontractivity_constant

DEFAULT_SEED = 0x5EEDF12A
DEFAULT_CELL_BUDGET = 2_000_000_000
CHUNK = 2048
GRID_RATIO = 1.15
LAST_STEP_FRACTION = 2.0 ** -12


# -- weighted statistics ----------------------------------------------------


def weighted_total(w, x):
    """``sum w x`` and its standard error treating the ``x_i`` as independent."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    total = float(np.sum(w * x))
    centre = total / float(np.sum(w))
    se = math.sqrt(float(np.sum((w * (x - centre)) ** 2)))
    return total, se


# -- time grid and starts -----------------------------------------------------


def time_grid(a, M, ratio=GRID_RATIO, last_fraction=LAST_STEP_FRACTION):
    """``0 = s_0 < ... < s_M = a`` with steps growing geometrically away from
    ``s = a``: the last step is ``a * last_fraction`` (up to rounding below),
    earlier steps grow by ``ratio`` until a cap chosen so exactly ``M`` steps
    fill ``[0, a]``. If ``M`` steps at ``ratio`` cannot reach ``a`` the ratio
    is increased."""
    a = check_positive(a, "a")
    if M < 1:
        raise DomainError("M must be >= 1")
    if M == 1:
        return np.array([0.0, a])
    first = a * last_fraction * (1.0 - 1e-9)
    j = np.arange(M)

    def steps(r, cap=np.inf):
        return np.minimum(first * r ** j, cap)

    with np.errstate(over="ignore"):
        reach = np.sum(steps(ratio))
    if not reach > a:
        ratio = brentq(lambda r: np.sum(steps(r)) - a, 1.0 + 1e-12, 64.0, xtol=1e-15)
        back = steps(ratio)
    else:
        cap = brentq(lambda c: np.sum(steps(ratio, c)) - a, first, a, xtol=1e-15 * a)
        back = steps(ratio, cap)
    s = np.concatenate([[0.0], np.cumsum(back[::-1])])
    s *= a / s[-1]
    s[-1] = a
    return s


def _r2_sequence(n, d):
    """Kronecker points ``frac(0.5 + i g)`` with the generalised golden ratio."""
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (d + 1))
    g = phi ** -(np.arange(1, d + 1))
    return np.mod(0.5 + np.arange(1, n + 1)[:, None] * g[None, :], 1.0)


def default_box_half_width(f, a, rel_mass=1e-10):
    """``L_0`` such that every term of ``f`` keeps all but ``rel_mass`` of its
    mass inside ``[-L_0 + 6 sqrt(a), L_0 - 6 sqrt(a)]^d``."""
    h = math.sqrt(2.0) * np.sqrt(f.widths2) * erfcinv(rel_mass / f.dim)
    inner = float(np.max(np.max(np.abs(f.centers), axis=1) + h))
    return inner + 6.0 * math.sqrt(a)


# -- path ensemble -----------------------------------------------------------


@dataclass(frozen=True)
class EnsembleConfig:
    dim: int
    a: float
    M: int
    N: int
    half_width: float
    master_seed: int = DEFAULT_SEED
    cell_budget: int = DEFAULT_CELL_BUDGET


class PathEnsemble:
    """Lazily regenerated Brownian paths.

    Path ``i`` draws its increments from a Philox stream keyed by the master
    seed with ``i`` in the high counter word, so the ``k``-th increment of a
    path is fixed by ``(master_seed, i, k)`` regardless of chunking or
    threads.
    """

    def __init__(self, config, time_grid_):
        self.config = config
        self.dim = config.dim
        self.horizon = float(config.a)
        self.time_grid = time_grid_
        self.time_grid.setflags(write=False)
        self.path_count = config.N
        self.master_seed = int(config.master_seed)
        self.half_width = float(config.half_width)

    @property
    def steps(self):
        return np.diff(self.time_grid)

    @property
    def time_to_go(self):
        return self.horizon - self.time_grid

    @property
    def box_volume(self):
        return (2.0 * self.half_width) ** self.dim

    def weights(self, lo=0, hi=None):
        hi = self.path_count if hi is None else hi
        return np.full(hi - lo, self.box_volume / self.path_count)

    def starts(self, lo=0, hi=None):
        hi = self.path_count if hi is None else hi
        L, N = self.half_width, self.path_count
        if self.dim == 1:
            u = (np.arange(lo, hi) + 0.5) / N
            return (-L + 2.0 * L * u)[:, None]
        return -L + 2.0 * L * _r2_sequence(hi, self.dim)[lo:]

    def increments(self, lo=0, hi=None):
        """Gaussian increments of shape ``(hi - lo, M, d)``."""
        hi = self.path_count if hi is None else hi
        M, d = self.time_grid.size - 1, self.dim
        out = np.empty((hi - lo, M, d))
        key = self.master_seed & ((1 << 64) - 1)
        for row, i in enumerate(range(lo, hi)):
            gen = np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, i]))
            out[row] = gen.standard_normal((M, d))
        return out * np.sqrt(self.steps)[None, :, None]

    def paths(self, lo=0, hi=None):
        """Positions ``B_{s_k}`` of shape ``(hi - lo, M + 1, d)``."""
        inc = self.increments(lo, hi)
        start = self.starts(lo, hi)
        out = np.empty((inc.shape[0], inc.shape[1] + 1, self.dim))
        out[:, 0] = start
        np.cumsum(inc, axis=1, out=out[:, 1:])
        out[:, 1:] += start[:, None, :]
        return out


def sample_paths(config):
    """Validate ``config`` and build the ensemble on the refined time grid."""
    d = check_dim(config.dim)
    a = check_positive(config.a, "a")
    check_positive(config.half_width, "half_width")
    if config.N < 1:
        raise DomainError("N must be >= 1")
    if config.M < 16:
        raise DomainError("M must be >= 16")
    cells = config.N * config.M * d
    if cells > config.cell_budget:
        raise BudgetError(f"N*M*d = {cells} exceeds the budget {config.cell_budget}", required=cells)
    return PathEnsemble(config, time_grid(a, config.M))


# -- transforms ---------------------------------------------------------------


def _heat_on_paths(f, B, tau):
    """``T_tau_k f(B[:, k])`` for paths ``B`` of shape ``(n, K, d)``."""
    v = f.widths2[None, :] + tau[:, None]
    amp = f.amplitudes[None, :] * (f.widths2[None, :] / v) ** (f.dim / 2.0)
    out = np.zeros(B.shape[:2])
    for j in range(f.n_terms):
        r2 = np.sum((B - f.centers[j]) ** 2, axis=2)
        with np.errstate(under="ignore"):
            out += amp[None, :, j] * np.exp(-r2 / (2.0 * v[None, :, j]))
    return out


def _grad_on_paths(f, B, tau):
    v = f.widths2[None, :] + tau[:, None]
    amp = f.amplitudes[None, :] * (f.widths2[None, :] / v) ** (f.dim / 2.0)
    out = np.zeros(B.shape)
    for j in range(f.n_terms):
        diff = B - f.centers[j]
        r2 = np.sum(diff * diff, axis=2)
        with np.errstate(under="ignore"):
            g = amp[None, :, j] * np.exp(-r2 / (2.0 * v[None, :, j])) / v[None, :, j]
        out -= g[:, :, None] * diff
    return out


@dataclass
class TransformRecords:
    """Per-path results of :func:`martingale_transform` (arrays of length N).

    ``sup_Y`` is the running max of ``|T_{2 tau} f(B)|``, ``sup_Y_abs`` the same
    for the absolute-amplitude majorant of ``|f|``, and ``sup_mart`` the running
    max of the genuine martingale ``|T_tau f(B)|``.
    """

    a: float
    alpha: float
    dim: int
    seed: int
    time_grid: np.ndarray
    weights: np.ndarray
    start: np.ndarray
    terminal: np.ndarray
    M_a: np.ndarray
    M_alpha_a: np.ndarray
    qv_a: np.ndarray
    qv_alpha_a: np.ndarray
    sup_Y: np.ndarray
    sup_Y_abs: np.ndarray
    sup_mart: np.ndarray
    f_terminal: np.ndarray
    T_a_start: np.ndarray
    subordination_checks: int
    subordination_violations: int
    subordination_min_slack: float
    subordination_max_rel_slack: float
    checkpoints: dict = field(default_factory=dict)
    qv: np.ndarray = None
    qv_alpha: np.ndarray = None

    def __len__(self):
        return self.M_a.size

    @property
    def M(self):
        return self.time_grid.size - 1

    @property
    def ito_residual(self):
        """``f(B_a) - T_a f(B_0) - M_f^a(a)`` per path."""
        return self.f_terminal - self.T_a_start - self.M_a


def _transform_chunk(ens, f, fabs, alpha, lo, hi, keep_paths, checkpoints):
    a = ens.horizon
    B = ens.paths(lo, hi)
    dB = np.diff(B, axis=1)
    tau = ens.time_to_go
    ds = ens.steps
    grad = _grad_on_paths(f, B[:, :-1], tau[:-1])
    inc = np.sum(grad * dB, axis=2)
    y = np.sum(grad * grad, axis=2) * ds[None, :]
    w_rel = (tau[:-1] / a) ** alpha
    qv = np.cumsum(y, axis=1)
    qvw = np.cumsum(w_rel[None, :] * y, axis=1)
    scale = a ** alpha
    qv_alpha = scale * qvw
    bound = scale * qv
    slack = bound - qv_alpha
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(bound > 0, slack / bound, 0.0)
    doubled = _heat_on_paths(f, B, 2.0 * tau)
    doubled_abs = _heat_on_paths(fabs, B, 2.0 * tau)
    mart = _heat_on_paths(f, B, tau)
    out = dict(
        start=B[:, 0], terminal=B[:, -1],
        M_a=np.sum(inc, axis=1),
        M_alpha_a=np.sum(inc * tau[None, :-1] ** (alpha / 2.0), axis=1),
        qv_a=qv[:, -1], qv_alpha_a=qv_alpha[:, -1],
        sup_Y=np.max(np.abs(doubled), axis=1),
        sup_Y_abs=np.max(np.abs(doubled_abs), axis=1),
        sup_mart=np.max(np.abs(mart), axis=1),
        f_terminal=mart[:, -1], T_a_start=mart[:, 0],
        checks=qv.size,
        violations=int(np.count_nonzero(qvw > qv) + np.count_nonzero(qv_alpha > bound)),
        min_slack=float(np.min(slack)), max_rel=float(np.max(rel)),
    )
    if checkpoints is not None:
        out["cp"] = {
            "B": B[:, checkpoints], "martingale": mart[:, checkpoints], "doubled": doubled[:, checkpoints],
        }
    if keep_paths:
        out["qv"], out["qv_alpha"] = qv, qv_alpha
    return out


def martingale_transform(ens, f, alpha, keep_paths=False, checkpoints=None, threads=1, chunk=CHUNK):
    """Compute the transforms, their quadratic variations and running maxima
    for every path of ``ens``.

    Paths are processed in fixed chunks and concatenated in path order, so
    the result does not depend on ``threads``. The differential-subordination
    inequality ``[M^{a,alpha}](s_k) <= a^alpha [M^a](s_k)`` is checked on every
    step while streaming; the cumulative sums are kept only if
    ``keep_paths``. ``checkpoints`` are grid indices at which positions and
    both candidate ``Y`` processes are stored.
    """
    if not isinstance(f, GaussianMixture) or f.dim != ens.dim:
        raise DomainError("f must be a GaussianMixture of the ensemble dimension")
    alpha = check_alpha(alpha, ens.dim)
    if checkpoints is not None:
        checkpoints = np.asarray(sorted(set(int(c) for c in checkpoints)))
        if checkpoints.min() < 0 or checkpoints.max() > ens.time_grid.size - 1:
            raise DomainError("checkpoint index outside the time grid")
    fabs = f.absolute()
    bounds = [(lo, min(lo + chunk, ens.path_count)) for lo in range(0, ens.path_count, chunk)]
    job = lambda b: _transform_chunk(ens, f, fabs, alpha, b[0], b[1], keep_paths, checkpoints)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    cat = lambda k: np.concatenate([p[k] for p in parts])
    cps = {}
    if checkpoints is not None:
        cps = {k: np.concatenate([p["cp"][k] for p in parts]) for k in ("B", "martingale", "doubled")}
        cps["index"] = checkpoints
        cps["time"] = ens.time_grid[checkpoints]
    return TransformRecords(
        a=ens.horizon, alpha=alpha, dim=ens.dim, seed=ens.master_seed, time_grid=ens.time_grid,
        weights=ens.weights(), start=cat("start"), terminal=cat("terminal"),
        M_a=cat("M_a"), M_alpha_a=cat("M_alpha_a"), qv_a=cat("qv_a"), qv_alpha_a=cat("qv_alpha_a"),
        sup_Y=cat("sup_Y"), sup_Y_abs=cat("sup_Y_abs"), sup_mart=cat("sup_mart"),
        f_terminal=cat("f_terminal"), T_a_start=cat("T_a_start"),
        subordination_checks=int(sum(p["checks"] for p in parts)),
        subordination_violations=int(sum(p["violations"] for p in parts)),
        subordination_min_slack=float(min(p["min_slack"] for p in parts)),
        subordination_max_rel_slack=float(max(p["max_rel"] for p in parts)),
        checkpoints=cps,
        qv=cat("qv") if keep_paths else None,
        qv_alpha=cat("qv_alpha") if keep_paths else None,
    )


# -- estimators and checks ------------------------------------------------------


@dataclass(frozen=True)
class ProjectionEstimate:
    x: np.ndarray
    estimate: np.ndarray
    std_error: np.ndarray
    effective_size: np.ndarray
    bandwidth: float


def conditional_projection(records, x_grid, bandwidth=None, min_records=10_000, min_effective=100.0):
    """Nadaraya-Watson estimate of ``E[M_f^{a,alpha}(a) | B_a = x]``."""
    model = NadarayaWatson(bandwidth=bandwidth, min_samples=min_records, min_effective=min_effective)
    model.fit(records.terminal, records.M_alpha_a, sample_weight=records.weights)
    x = np.asarray(x_grid, dtype=float).reshape(-1, records.dim)
    est, se, neff = model.predict_with_error(x)
    return ProjectionEstimate(x, est, se, neff, model.bandwidth_)


@dataclass(frozen=True)
class SubordinationResult:
    fraction_satisfied: float
    worst_margin: float
    max_relative_slack: float
    checks: int


def differential_subordination_check(records, a=None, alpha=None):
    """Fraction of (path, step) pairs with ``[M^{a,alpha}] <= a^alpha [M^a]``."""
    if len(records) == 0:
        raise DomainError("no records")
    a = records.a if a is None else a
    alpha = records.alpha if alpha is None else alpha
    if records.qv is not None:
        bound = a ** alpha * records.qv
        ok = records.qv_alpha <= bound
        slack = bound - records.qv_alpha
        return SubordinationResult(float(np.mean(ok)), float(np.min(slack)),
                                   records.subordination_max_rel_slack, int(ok.size))
    n = records.subordination_checks
    frac = 1.0 - records.subordination_violations / n if n else 1.0
    return SubordinationResult(frac, records.subordination_min_slack,
                               records.subordination_max_rel_slack, n)


@dataclass(frozen=True)
class RatioResult:
    lhs: float
    rhs: float
    ratio: float
    std_error: float


def burkholder_gundy_ratio(records, q):
    """``(E|M^{a,alpha}(a)|^q)^{1/q}`` over ``(E [M^{a,alpha}](a)^{q/2})^{1/q}``."""
    q = float(q)
    if not q > 1:
        raise DomainError("q must be > 1")
    w = records.weights
    X = np.abs(records.M_alpha_a) ** q
    Y = records.qv_alpha_a ** (q / 2.0)
    A, B = float(np.sum(w * X)), float(np.sum(w * Y))
    if B == 0:
        return RatioResult(0.0, 0.0, float("nan"), float("nan"))
    r = A / B
    se_r = math.sqrt(float(np.sum((w * (X - r * Y)) ** 2))) / B
    ratio = r ** (1.0 / q)
    return RatioResult(A ** (1.0 / q), B ** (1.0 / q), ratio, ratio * se_r / (q * r) if r > 0 else float("nan"))


@dataclass(frozen=True)
class DoobResult:
    p: float
    process: str
    lhs: float
    lhs_se: float
    rhs: float
    bound: float
    satisfied: bool
    terminal_moment: float
    terminal_se: float
    terminal_ok: bool


_SUPS = {"martingale": "sup_mart", "doubled": "sup_Y", "doubled_abs": "sup_Y_abs"}


def doob_check(records, f, p, process="martingale", norm_p=None):
    """``E sup |Y|^p`` against ``(p/(p-1))^p ||f||_p^p`` and the terminal identity
    ``E|f(B_a)|^p = ||f||_p^p``.

    ``process='martingale'`` uses ``Y_s = T_{a-s} f(B_s)``, the martingale
    to which Doob's inequality applies under the ``sigma = 1`` convention;
    ``'doubled'`` uses ``T_{2(a-s)} f(B_s)``.
    """
    p = float(p)
    if not p > 1:
        raise DomainError("p must be > 1")
    if process not in _SUPS:
        raise DomainError(f"unknown process {process!r}")
    w = records.weights
    lhs, lhs_se = weighted_total(w, getattr(records, _SUPS[process]) ** p)
    norm_p = f.lp_norm(p) if norm_p is None else norm_p
    rhs = norm_p ** p
    bound = (p / (p - 1.0)) ** p
    term, term_se = weighted_total(w, np.abs(records.f_terminal) ** p)
    return DoobResult(
        p, process, lhs, lhs_se, rhs, bound,
        bool(lhs - 3.0 * lhs_se <= bound * rhs),
        term, term_se, bool(abs(term - rhs) <= 3.0 * term_se),
    )


@dataclass(frozen=True)
class MartingaleTest:
    process: str
    max_abs_z: float
    cells: int
    passed: bool
    table: list


def martingale_property_check(records, process="martingale", n_bins=4, z_limit=3.0, min_count=200,
                               active_rel=1e-3):
    """Mean increment of ``Y`` between consecutive checkpoints, conditioned on
    coarse bins of the position at the earlier checkpoint.

    Bins are equal-weight slices of the first coordinate among paths whose
    ``|Y|`` at either checkpoint exceeds ``active_rel`` times its maximum.
    Far outside that region the increments are dominated by rare paths that
    wander into the bulk, and the sample standard error understates the
    spread, so those paths are left out. Each (interval, bin) cell yields a
    z-score.
    """
    cp = records.checkpoints
    if not cp:
        raise DomainError("records carry no checkpoints")
    Y = cp[process]
    B = cp["B"][:, :, 0]
    w = records.weights
    table = []
    for j in range(Y.shape[1] - 1):
        dY = Y[:, j + 1] - Y[:, j]
        level = active_rel * float(np.max(np.abs(Y[:, j:j + 2])) or 1.0)
        active = np.maximum(np.abs(Y[:, j]), np.abs(Y[:, j + 1])) > level
        if np.count_nonzero(active) < n_bins * min_count:
            continue
        edges = np.quantile(B[active, j], np.linspace(0.0, 1.0, n_bins + 1))
        which = np.clip(np.searchsorted(edges, B[:, j], side="right") - 1, 0, n_bins - 1)
        for b in range(n_bins):
            sel = active & (which == b)
            if np.count_nonzero(sel) < min_count:
                continue
            m, se = weighted_total(w[sel], dY[sel])
            z = m / se if se > 0 else 0.0
            table.append((float(cp["time"][j]), float(cp["time"][j + 1]), float(edges[b]), float(edges[b + 1]), m, se, z))
    zmax = max((abs(row[-1]) for row in table), default=0.0)
    return MartingaleTest(process, zmax, len(table), bool(zmax <= z_limit), table)


def ito_isometry_oracle(f, alpha, a, panels=48, nodes=12):
    """``int_0^a tau^alpha int |grad T_tau f|^2 dx dtau`` (``alpha = 0`` gives the
    plain transform)."""
    a = check_positive(a, "a")
    t, w = log_panel_rule(a * 1e-14, a, panels, nodes)
    vals = np.array([f.dirichlet(f, ti) for ti in t])
    head = f.dirichlet(f, 0.0) * (a * 1e-14) ** (alpha + 1.0) / (alpha + 1.0)
    return float(np.sum(w * t ** alpha * vals) + head)


def ito_isometry_grid(f, alpha, grid):
    """Exact Lebesgue expectation of the discrete left-point quadratic variation."""
    grid = np.asarray(grid, dtype=float)
    tau = grid[-1] - grid[:-1]
    return float(sum(ti ** alpha * f.dirichlet(f, ti) * dsi for ti, dsi in zip(tau, np.diff(grid))))


@dataclass(frozen=True)
class NewDeltaResult:
    fraction_satisfied: float
    worst_ratio: float
    C1: float
    C2: float
    ultracontractivity: float
    delta: float


def gradient_constant(d):
    """Constant of the heat-kernel gradient bound: ``|grad k_t| <= c t^{-1/2} k_{2t}``."""
    return 2.0 ** ((d + 4) / 2.0)


def newdelta_constants(f, p, alpha, delta, grid, norm_p=None, ultracontractivity=None):
    """``C1``, ``C2`` for the pathwise bound on ``[M^{a,alpha}](a)``.

    On the discrete grid ``[M^{a,alpha}](a) = sum tau_k^alpha |grad T_tau_k f|^2 ds_k``.
    The gradient bound gives ``|grad T_tau f| <= c tau^{-1/2} T_{2tau}|f|``; steps
    with ``tau_k < delta`` are bounded by the running max of ``T_{2tau}|f|`` and
    the discrete sum ``D1 = sum tau_k^{alpha-1} ds_k``; the others by
    ultracontractivity of ``|f|`` at times ``2 tau_k`` and
    ``D2 = sum tau_k^{alpha-1-d/p} ds_k``. Each discrete sum is replaced by the
    larger of itself and its continuous counterpart so the constants never
    fall below the analytic ones.
    """
    d = f.dim
    grid = np.asarray(grid, dtype=float)
    a = grid[-1]
    tau = a - grid[:-1]
    ds = np.diff(grid)
    fabs = f.absolute()
    cg2 = gradient_constant(d) ** 2
    small = tau < delta
    D1 = float(np.sum(tau[small] ** (alpha - 1.0) * ds[small]))
    C1 = cg2 * max(1.0 / alpha, D1 / delta ** alpha)
    C2 = 0.0
    cu = float("nan")
    if np.any(~small):
        norm_p = f.lp_norm(p) if norm_p is None else norm_p
        if ultracontractivity is None:
            from .semigroup import default_t_grid
            tg = np.union1d(default_t_grid(81), 2.0 * tau[~small])
            cu = ultracontractivity_constant(fabs, p, t_grid=tg)
        else:
            cu = ultracontractivity
        ratio = (fabs.lp_norm(p) / norm_p) ** 2
        e = d / p - alpha
        D2 = float(np.sum(tau[~small] ** (alpha - 1.0 - d / p) * ds[~small]))
        C2 = cg2 * cu ** 2 * 2.0 ** (-d / p) * ratio * max(1.0 / e, D2 * delta ** e)
    return C1, C2, cu


def lemma_newdelta_check(records, f, p, alpha, delta, norm_p=None, ultracontractivity=None):
    """Pathwise ``[M^{a,alpha}](a) <= C1 sup_Y'^2 delta^alpha + C2 ||f||_p^2 delta^(alpha - d/p)``
    with ``sup_Y'`` the running max of ``T_{2(a-s)}`` applied to the
    absolute-amplitude majorant of ``|f|``."""
    p = float(p)
    d = f.dim
    if not (1.0 < p < d / alpha):
        raise DomainError(f"p must lie in (1, d/alpha) = (1, {d / alpha:g})")
    delta = check_positive(delta, "delta")
    norm_p = f.lp_norm(p) if norm_p is None else norm_p
    C1, C2, cu = newdelta_constants(f, p, alpha, delta, records.time_grid, norm_p, ultracontractivity)
    rhs = C1 * records.sup_Y_abs ** 2 * delta ** alpha + C2 * norm_p ** 2 * delta ** (alpha - d / p)
    lhs = records.qv_alpha_a
    ok = lhs <= rhs
    with np.errstate(invalid="ignore", divide="ignore"):
        worst = float(np.max(np.where(rhs > 0, lhs / rhs, 0.0)))
    return NewDeltaResult(float(np.mean(ok)), worst, C1, C2, cu, delta)


# -- summaries ------------------------------------------------------------------

SUMMARY_COLUMNS = ["seed", "d", "a", "M", "N", "alpha", "statistic", "value", "std_error"]


def summary_rows(records, stats):
    """CSV rows for ``stats``, a sequence of ``(name, value, std_error)``."""
    head = [records.seed, records.dim, records.a, records.M, len(records), records.alpha]
    return [head + [name, value, se] for name, value, se in stats]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def summary_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()
