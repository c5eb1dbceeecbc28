"""Hardy-Littlewood-Sobolev ratios ``||I_alpha f||_q / ||f||_p``, their
dilation behaviour, and the sweep report."""

from dataclasses import asdict, dataclass, field
import csv
import io
import json
import math

import numpy as np

from .errors import AccuracyError, DomainError, FrihlsError
from .fractional import (
    FractionalParams,
    gaussian_fractional_closed_form,
    mellin_fractional_integral,
    riesz_convolution_oracle,
)
from .mixture import GaussianMixture
from .quadrature import radial_lq_integral

METHODS = ("mellin", "riesz", "fourier")
SCHEMA = "hls-report/1"


EVAL_CHUNK = 4096


def _evaluator(method, f, alpha):
    if method == "mellin":
        fn = lambda pts: mellin_fractional_integral(f, alpha, pts)
    elif method == "riesz":
        fn = lambda pts: riesz_convolution_oracle(f, alpha, pts)
    elif method == "fourier":
        fn = lambda pts: gaussian_fractional_closed_form(f, alpha, pts)
    else:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")

    def chunked(pts):
        pts = np.atleast_2d(pts)
        return np.concatenate([np.atleast_1d(fn(pts[i:i + EVAL_CHUNK]))
                               for i in range(0, pts.shape[0], EVAL_CHUNK)])
    return chunked


def _geometry(f):
    # the signed centroid can sit far from the mass when terms nearly cancel
    center = f.centroid(absolute=True)
    core = float(np.max(np.linalg.norm(f.centers - center, axis=1) + 6.0 * np.sqrt(f.widths2)))
    symmetric = f.n_terms == 1 or np.allclose(f.centers, f.centers[0])
    return center, core, symmetric


ANGULAR_START = {2: 24, 3: 12}
ANGULAR_MAX = {2: 768, 3: 128}


def _radial(ev, f, alpha, q, n_dirs, r_factor):
    center, core, _ = _geometry(f)
    masses = np.abs(f.term_masses)
    expected = alpha - f.dim if abs(f.mass) > 1e-6 * float(np.sum(masses)) else None
    return radial_lq_integral(ev, center, f.dim, q, core, r_factor * core, n_dirs=n_dirs,
                              panels=36, n=12, expected_exponent=expected)


def angular_resolution(f, alpha, q, rtol=1e-7, r_factor=400.0):
    """Number of directions per angle at which the closed-form ``L^q`` norm
    stops changing by more than ``rtol`` under doubling."""
    _, _, symmetric = _geometry(f)
    if symmetric or f.dim == 1:
        return 1
    ev = _evaluator("fourier", f, alpha)
    n = ANGULAR_START[f.dim]
    prev = _radial(ev, f, alpha, q, n, r_factor)[0]
    while 2 * n <= ANGULAR_MAX[f.dim]:
        cur = _radial(ev, f, alpha, q, 2 * n, r_factor)[0]
        if abs(cur - prev) <= q * rtol * abs(cur):
            return 2 * n
        n, prev = 2 * n, cur
    raise AccuracyError(f"angular quadrature not resolved with {n} directions per angle")


def lq_norm_of_fractional(f, alpha, q, method="mellin", n_dirs=None, r_factor=400.0):
    """``||I_alpha f||_q`` by polar quadrature about the absolute centroid with a
    power-law continuation beyond ``r_factor`` core radii (far-field decay
    ``|x|^(alpha - d)`` for nonzero mass).

    Returns ``(norm, tail_fraction, fitted_exponent)``.
    """
    if n_dirs is None:
        n_dirs = angular_resolution(f, alpha, q, r_factor=r_factor)
    integral, tail, gamma = _radial(_evaluator(method, f, alpha), f, alpha, q, n_dirs, r_factor)
    return integral ** (1.0 / q), tail, gamma


@dataclass(frozen=True)
class RatioRecord:
    norm_f_p: float
    norm_If_q: float
    ratio: float
    method: str
    q: float


def hls_ratio(f, params, method="mellin", q=None, norm_f_p=None):
    """``||I_alpha f||_q / ||f||_p``; ``q`` defaults to the critical exponent."""
    if not isinstance(params, FractionalParams):
        raise TypeError("params must be FractionalParams")
    if not isinstance(f, GaussianMixture) or f.dim != params.dim:
        raise DomainError("f must be a GaussianMixture of dimension params.dim")
    if np.all(f.amplitudes == 0):
        raise DomainError("f must be nonzero")
    q = params.q if q is None else float(q)
    norm_p = f.lp_norm(params.p) if norm_f_p is None else norm_f_p
    norm_q, _, _ = lq_norm_of_fractional(f, params.alpha, q, method)
    return RatioRecord(norm_p, norm_q, norm_q / norm_p, method, q)


@dataclass(frozen=True)
class DilationRecord:
    lambdas: tuple
    ratios: tuple
    max_rel_spread: float
    q: float
    predicted_multipliers: tuple
    multiplier_errors: tuple


def dilation_invariance_check(f, params, lambdas=(0.25, 1.0, 4.0), q=None, method="mellin"):
    """``hls_ratio`` of ``f(lambda x)`` for each ``lambda``. At the critical
    exponent the ratios should coincide; for another ``q'`` they scale as
    ``lambda^(d (1/q - 1/q'))``, and the deviation from that law is reported."""
    lambdas = tuple(float(l) for l in lambdas)
    if any(not (0.125 <= l <= 8.0) for l in lambdas):
        raise DomainError("lambdas must lie in [1/8, 8]")
    q_used = params.q if q is None else float(q)
    ratios = tuple(hls_ratio(f.dilated(l), params, method, q_used).ratio for l in lambdas)
    spread = (max(ratios) - min(ratios)) / min(ratios)
    expo = params.dim * (1.0 / params.q - 1.0 / q_used)
    base = ratios[lambdas.index(1.0)] if 1.0 in lambdas else ratios[0] / lambdas[0] ** expo
    pred = tuple(l ** expo for l in lambdas)
    errs = tuple(abs(r / base / m - 1.0) for r, m in zip(ratios, pred))
    return DilationRecord(lambdas, ratios, spread, q_used, pred, errs)


# -- sweep and report ------------------------------------------------------------


@dataclass
class HlsEntry:
    d: int
    alpha: float
    p: float
    q: float
    f_id: str
    norm_f_p: float
    norm_If_q: float
    ratio: float
    method: str
    status: str = "ok"
    detail: str = ""


@dataclass
class HlsReport:
    entries: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)
    failed: bool = False
    truncated: bool = False

    def empirical_constant(self, d, alpha, p, method="mellin"):
        vals = [e.ratio for e in self.entries
                if (e.d, e.alpha, e.p, e.method) == (d, alpha, p, method) and e.status == "ok"]
        return max(vals) if vals else float("nan")

    def to_dict(self):
        entries = [asdict(e) for e in self.entries]
        return {"schema": SCHEMA, "failed": self.failed, "truncated": self.truncated,
                "entries": entries, "cells": self.cells, "constants": self.constants}

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if data.get("schema") != SCHEMA:
            raise DomainError(f"unsupported schema {data.get('schema')!r}")
        nan = lambda v: float("nan") if v is None else v
        entries = [HlsEntry(**{k: nan(v) for k, v in e.items()}) for e in data["entries"]]
        constants = {k: nan(v) for k, v in data["constants"].items()}
        return cls(entries, constants, data["cells"], data["failed"], data["truncated"])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["d", "alpha", "p", "q", "f_id", "norm_f_p", "norm_If_q", "ratio", "method", "status"]
        writer.writerow(cols)
        for e in self.entries:
            writer.writerow([_fmt(getattr(e, c)) for c in cols])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


@dataclass(frozen=True)
class SweepConfig:
    dims: tuple = (1,)
    alphas: tuple = (0.5,)
    ps: tuple = (1.5,)
    family_size: int = 10
    seed: int = 0x5EEDF12A
    methods: tuple = ("mellin",)
    include_canonical: bool = True
    agreement_tol: float = 1e-3


def function_family(d, size, seed, include_canonical=True):
    """``[(f_id, mixture)]``: the unit Gaussian (if requested) followed by
    seeded random signed mixtures."""
    family = []
    if size <= 0:
        return family
    if include_canonical:
        family.append(("gauss", GaussianMixture.gaussian(d)))
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, d])
    while len(family) < size:
        f = GaussianMixture.random(rng, d, signed=True)
        mass_ratio = abs(f.mass) / float(np.sum(np.abs(f.term_masses)))
        if mass_ratio < 0.05:
            continue
        family.append((f"mix{len(family):03d}", f))
    return family


def sweep(config, extra_constants=None):
    """Run ``hls_ratio`` over every valid ``(d, alpha, p)`` cell and family
    member; cell failures are recorded and the sweep continues."""
    report = HlsReport()
    for d in sorted(config.dims):
        family = function_family(d, config.family_size, config.seed, config.include_canonical)
        for alpha in sorted(config.alphas):
            for p in sorted(config.ps):
                key = f"d={d},alpha={alpha:g},p={p:g}"
                try:
                    params = FractionalParams(alpha, p, d)
                except DomainError as exc:
                    report.cells[key] = {"status": "invalid", "detail": str(exc)}
                    continue
                cell = {"status": "ok", "q": params.q, "max_cross_method_rel": 0.0}
                for f_id, f in family:
                    norm_p = f.lp_norm(p)
                    by_method = {}
                    for method in config.methods:
                        try:
                            rec = hls_ratio(f, params, method, norm_f_p=norm_p)
                            entry = HlsEntry(d, alpha, p, params.q, f_id, rec.norm_f_p, rec.norm_If_q,
                                             rec.ratio, method)
                            if not (np.isfinite(rec.ratio) and rec.ratio > 0):
                                entry.status, entry.detail = "failed", "ratio not positive and finite"
                            by_method[method] = rec.ratio
                        except FrihlsError as exc:
                            entry = HlsEntry(d, alpha, p, params.q, f_id, norm_p, float("nan"), float("nan"),
                                             method, "failed", f"{type(exc).__name__}: {exc}")
                        if entry.status != "ok":
                            cell["status"] = "failed"
                            report.failed = True
                        report.entries.append(entry)
                    if len(by_method) > 1:
                        vals = list(by_method.values())
                        rel = (max(vals) - min(vals)) / min(vals)
                        cell["max_cross_method_rel"] = max(cell["max_cross_method_rel"], rel)
                        if rel > config.agreement_tol:
                            cell["status"] = "failed"
                            report.failed = True
                running = []
                best = 0.0
                for e in report.entries:
                    if (e.d, e.alpha, e.p, e.method) == (d, alpha, p, config.methods[0]) and e.status == "ok":
                        best = max(best, e.ratio)
                        running.append(best)
                cell["empirical_C"] = best if running else float("nan")
                cell["running_max"] = running
                report.cells[key] = cell
                report.constants[f"C[{key}]"] = cell["empirical_C"]
    for p in sorted(config.ps):
        report.constants[f"doob_bound[p={p:g}]"] = (p / (p - 1.0)) ** p
        report.constants[f"p_star[p={p:g}]"] = max(p, p / (p - 1.0))
    if extra_constants:
        report.constants.update(extra_constants)
    return report
