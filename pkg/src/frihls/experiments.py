"""Experiment configuration and the per-command check batteries.

A battery runs the invariant checks of one module on seeded inputs and
returns a :class:`BatteryReport`; the report serializes deterministically
(no timestamps, 17 significant digits) so reruns compare byte for byte.
"""

from dataclasses import asdict, dataclass, field
import csv
import io
import json
import math
import os

import numpy as np

from .errors import BudgetError, CoverageError, DomainError, FrihlsError

DEFAULT_SEED = 0x5EEDF12A
COMMANDS = ("kernels", "semigroup", "frac", "mc", "subord", "hls")
FORMATS = ("csv", "json")
SCHEMA = "frihls-battery/1"

TOLERANCES = {
    "normalization": 1e-8,
    "kernel_semigroup": 1e-8,
    "grad_margin": 1.0,
    "semigroup_law": 1e-14,
    "contraction": 1e-6,
    "spectral": 1e-6,
    "maximal_refinement": 0.01,
    "oracle": 1e-3,
    "homogeneity": 1e-4,
    "projection_change": 0.01,
    "z_limit": 3.0,
    "poisson": 1e-6,
    "laplace": 1e-6,
    "scaling": 1e-6,
    "scaling_closed": 1e-10,
    "chapman": 1e-4,
    "fit_ratio": 100.0,
    "laplacian": 0.01,
    "generator": 0.02,
    "agreement": 1e-3,
    "dilation": 5e-3,
    "wrong_exponent": 0.02,
    "family_stability": 0.05,
}


class ConfigError(FrihlsError, ValueError):
    """Malformed or out-of-range experiment configuration."""

    def __init__(self, message, field=None, line=None, column=None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column


# -- configuration ------------------------------------------------------------------


def _num_list(kind=float):
    def conv(name, value):
        if not isinstance(value, (list, tuple)):
            value = [value]
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name}: expected numbers, got {v!r}", field=name)
            if kind is int and float(v) != int(v):
                raise ConfigError(f"{name}: expected integers, got {v!r}", field=name)
            if not math.isfinite(float(v)):
                raise ConfigError(f"{name}: values must be finite", field=name)
            out.append(kind(v))
        return tuple(out)
    return conv


def _scalar(kind=float):
    def conv(name, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}", field=name)
        if kind is int and float(value) != int(value):
            raise ConfigError(f"{name}: expected an integer, got {value!r}", field=name)
        if not math.isfinite(float(value)):
            raise ConfigError(f"{name}: must be finite", field=name)
        return kind(value)
    return conv


def _strings(choices):
    def conv(name, value):
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{name}: expected strings", field=name)
        bad = [v for v in value if v not in choices]
        if bad:
            raise ConfigError(f"{name}: unknown value {bad[0]!r}; expected one of {choices}", field=name)
        return tuple(value)
    return conv


# (converter, default); list-valued entries also accept a bare scalar
PARAMETERS = {
    "kernels": {
        "dims": (_num_list(int), (1, 2, 3)),
        "t_exponents": (_num_list(float), (-3.0, 3.0)),
        "n_times": (_scalar(int), 25),
        "n_radii": (_scalar(int), 241),
    },
    "semigroup": {
        "dims": (_num_list(int), (1,)),
        "n_mixtures": (_scalar(int), 10),
        "ps": (_num_list(float), (1.5, 2.0, 4.0)),
        "times": (_num_list(float), (0.1, 1.0, 10.0)),
        "grid_points": (_scalar(int), 128),
    },
    "frac": {
        "dims": (_num_list(int), (1, 2, 3)),
        "alphas": (_num_list(float), (0.5, 1.0)),
        "n_mixtures": (_scalar(int), 10),
        "n_points": (_scalar(int), 8),
        "projection_a": (_num_list(float), (100.0, 1000.0)),
        "majorization_pairs": (_scalar(int), 50),
    },
    "mc": {
        "alpha": (_scalar(float), 0.5),
        "a": (_scalar(float), 10.0),
        "N": (_scalar(int), 100_000),
        "M": (_scalar(int), 512),
        "bandwidth": (_scalar(float), 0.05),
        "x_points": (_num_list(float), (-1.0, -0.5, 0.0, 0.5, 1.0)),
        "ps": (_num_list(float), (1.5, 2.0, 4.0)),
        "qs": (_num_list(float), (2.0, 4.0)),
        "delta": (_scalar(float), 1.0),
        "cell_budget": (_scalar(float), 2e9),
    },
    "subord": {
        "betas": (_num_list(float), (0.3, 0.5, 0.7)),
        "dims": (_num_list(int), (1, 2)),
        "times": (_num_list(float), (0.5, 1.0, 2.0)),
        "ys": (_num_list(float), (0.5, 1.0, 2.0, 5.0)),
    },
    "hls": {
        "dims": (_num_list(int), (1,)),
        "alphas": (_num_list(float), (0.5,)),
        "ps": (_num_list(float), (1.5,)),
        "family_size": (_scalar(int), 10),
        "methods": (_strings(("mellin", "riesz", "fourier")), ("mellin", "riesz", "fourier")),
        "lambdas": (_num_list(float), (0.25, 1.0, 4.0)),
        "wrong_q_factor": (_scalar(float), 1.2),
        "bg_paths": (_scalar(int), 20_000),
        "bg_qs": (_num_list(float), (2.0, 4.0)),
    },
}
# singular spellings accepted on input and stored under the plural key
ALIASES = {"d": "dims", "alpha": "alphas", "p": "ps", "beta": "betas", "t": "times"}
COMMON = ("command", "seed", "tolerances", "output_dir", "format", "threads", "params")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int = DEFAULT_SEED
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "."
    format: str = "csv"
    threads: int = None
    params: dict = field(default_factory=dict)

    def tolerance(self, name):
        return self.tolerances.get(name, TOLERANCES[name])

    @property
    def worker_threads(self):
        return self.threads if self.threads else (os.cpu_count() or 1)

    def to_dict(self):
        return {
            "command": self.command, "seed": self.seed, "tolerances": dict(sorted(self.tolerances.items())),
            "output_dir": self.output_dir, "format": self.format, "threads": self.threads,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.params.items())},
        }


def parse_seed(value, name="seed"):
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected an integer", field=name)
    if isinstance(value, str):
        try:
            value = int(value.replace("_", ""), 0)
        except ValueError:
            raise ConfigError(f"{name}: cannot parse {value!r} as an integer", field=name) from None
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int) or not 0 <= value < 2 ** 64:
        raise ConfigError(f"{name}: must be an unsigned 64-bit integer", field=name)
    return value


def parse_tolerances(items):
    out = {}
    for name, value in dict(items).items():
        if name not in TOLERANCES:
            raise ConfigError(f"tolerances: unknown tolerance {name!r}; known: {sorted(TOLERANCES)}",
                              field=f"tolerances.{name}")
        out[name] = _scalar(float)(f"tolerances.{name}", value)
        if out[name] <= 0:
            raise ConfigError(f"tolerances.{name}: must be > 0", field=f"tolerances.{name}")
    return out


def build_config(data):
    """Validate a decoded mapping into an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    command = data.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command: expected one of {COMMANDS}, got {command!r}", field="command")
    spec = PARAMETERS[command]
    raw = {}
    extra = data.get("params") or {}
    if not isinstance(extra, dict):
        raise ConfigError("params: expected an object", field="params")
    items = list(extra.items()) + [(k, v) for k, v in data.items() if k not in COMMON]
    for key, value in items:
        name = key if key in spec else ALIASES.get(key, key)
        if name not in spec:
            raise ConfigError(f"{key}: unknown field for command {command!r}", field=key)
        raw[name] = value
    params = {name: conv(name, raw[name]) if name in raw else default
              for name, (conv, default) in spec.items()}
    fmt = data.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"format: expected one of {FORMATS}, got {fmt!r}", field="format")
    threads = data.get("threads")
    if threads is not None:
        threads = _scalar(int)("threads", threads)
        if threads < 1:
            raise ConfigError("threads: must be >= 1", field="threads")
    out_dir = data.get("output_dir", ".")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output_dir: expected a nonempty path", field="output_dir")
    config = ExperimentConfig(
        command=command,
        seed=parse_seed(data.get("seed", DEFAULT_SEED)),
        tolerances=parse_tolerances(data.get("tolerances") or {}),
        output_dir=out_dir,
        format=fmt,
        threads=threads,
        params=params,
    )
    _check_ranges(config)
    return config


def parse_config(source):
    """Parse JSON text into a validated :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        With ``line``/``column`` set for malformed JSON, or ``field`` set for
        a value outside its module's domain.
    """
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                          line=exc.lineno, column=exc.colno) from None
    return build_config(data)


def serialize_config(config):
    return json.dumps(config.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fail(name, message):
    raise ConfigError(f"{name}: {message}", field=name)


def _check_ranges(config):
    P = config.params
    cmd = config.command
    for key in ("dims",):
        if key in P:
            for d in P[key]:
                if not 1 <= d <= 3:
                    _fail("d", f"dimension {d} outside the supported range 1..3")
            if not P[key]:
                _fail("d", "needs at least one dimension")
    for key in ("n_mixtures", "n_points", "majorization_pairs", "n_times", "grid_points", "family_size"):
        if key in P and P[key] < (0 if key in ("family_size", "majorization_pairs") else 1):
            _fail(key, "out of range")
    if cmd == "kernels":
        lo, hi = P["t_exponents"][0], P["t_exponents"][-1]
        if len(P["t_exponents"]) != 2 or lo > hi:
            _fail("t_exponents", "expected [low, high] with low <= high")
        if P["n_radii"] < 2:
            _fail("n_radii", "must be >= 2")
    if cmd == "semigroup":
        if any(p < 1 for p in P["ps"]) or any(p <= 1 for p in P["ps"]):
            _fail("p", "maximal ratios need p > 1")
        if any(t <= 0 for t in P["times"]):
            _fail("t", "times must be > 0")
        n = P["grid_points"]
        if n < 8 or n & (n - 1):
            _fail("grid_points", "must be a power of two >= 8")
    if cmd == "frac":
        for a in P["alphas"]:
            if not 0 < a < max(P["dims"]):
                _fail("alpha", f"alpha = {a:g} not in (0, d) for d = {max(P['dims'])}")
        if any(a <= 0 for a in P["projection_a"]):
            _fail("projection_a", "must be > 0")
    if cmd == "mc":
        if not 0 < P["alpha"] < 1:
            _fail("alpha", f"alpha = {P['alpha']:g} not in (0, d) for d = 1")
        if P["a"] <= 0:
            _fail("a", "must be > 0")
        if P["N"] < 1:
            _fail("N", "must be >= 1")
        if P["M"] < 16:
            _fail("M", "must be >= 16")
        if P["bandwidth"] <= 0:
            _fail("bandwidth", "must be > 0")
        if any(p <= 1 for p in P["ps"]):
            _fail("p", "Doob checks need p > 1")
        if any(q <= 1 for q in P["qs"]):
            _fail("qs", "Burkholder-Gundy ratios need q > 1")
        if P["delta"] <= 0:
            _fail("delta", "must be > 0")
    if cmd == "subord":
        if any(not 0 < b < 1 for b in P["betas"]):
            _fail("beta", "must lie in (0, 1)")
        if any(d > 2 for d in P["dims"]):
            _fail("d", "subordination batteries support d <= 2")
        if any(t <= 0 for t in P["times"]) or any(y <= 0 for y in P["ys"]):
            _fail("t", "times and Laplace arguments must be > 0")
    if cmd == "hls":
        for d in P["dims"]:
            for a in P["alphas"]:
                if not 0 < a < d:
                    _fail("alpha", f"alpha = {a:g} not in (0, d) for d = {d}")
                for p in P["ps"]:
                    if not 1 < p < d / a:
                        _fail("p", f"p = {p:g} not in (1, d/alpha) for d = {d}, alpha = {a:g}")
        if any(not 0.125 <= l <= 8 for l in P["lambdas"]):
            _fail("lambdas", "must lie in [1/8, 8]")
        if P["wrong_q_factor"] <= 0 or P["wrong_q_factor"] == 1:
            _fail("wrong_q_factor", "must be positive and different from 1")
        if P["bg_paths"] < 0:
            _fail("bg_paths", "must be >= 0")
        if any(q <= 1 for q in P["bg_qs"]):
            _fail("bg_qs", "Burkholder-Gundy ratios need q > 1")


# -- reports --------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    case: str
    value: float
    reference: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class BatteryReport:
    command: str
    seed: int
    config: dict
    checks: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    truncated: bool = False
    attachment: object = None

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, case, value, reference, tolerance, passed, detail=""):
        self.checks.append(Check(name, case, _num(value), _num(reference), _num(tolerance), bool(passed), detail))
        return bool(passed)

    def fail(self, name, case, exc):
        return self.add(name, case, float("nan"), float("nan"), float("nan"), False,
                        f"{type(exc).__name__}: {exc}")

    def to_dict(self):
        out = {
            "schema": SCHEMA, "command": self.command, "seed": self.seed, "config": self.config,
            "passed": self.passed, "truncated": self.truncated,
            "checks": [asdict(c) for c in self.checks], "constants": dict(sorted(self.constants.items())),
        }
        if self.attachment is not None:
            out["hls_report"] = self.attachment.to_dict()
        return out

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check", "case", "value", "reference", "tolerance", "passed", "detail"])
        for c in self.checks:
            writer.writerow([c.name, c.case, _fmt(c.value), _fmt(c.reference), _fmt(c.tolerance),
                             "true" if c.passed else "false", c.detail])
        for k, v in sorted(self.constants.items()):
            writer.writerow(["constant", k, _fmt(v), "", "", "true", ""])
        if self.truncated:
            writer.writerow(["truncated", "", "", "", "", "false", "resource budget exceeded"])
        return buf.getvalue()

    def render(self, fmt):
        return self.to_json() if fmt == "json" else self.to_csv()


def _num(v):
    return float(v) if isinstance(v, (int, float, np.integer, np.floating)) else v


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


# -- batteries ---------------------------------------------------------------------------


def run_kernels(config, report):
    from .kernels import HeatKernelSpec, RieszKernelSpec, grad_bound_margin, heat_kernel, poisson_kernel, riesz_kernel
    from .quadrature import panel_rule, sphere_area
    P = config.params
    tol = config.tolerance("normalization")
    for d in P["dims"]:
        spec = HeatKernelSpec(1.0, d)
        for t in (0.1, 1.0, 10.0):
            s = math.sqrt(t)
            r, w = panel_rule(np.linspace(0.0, 40.0 * s, 81), 16)
            total = sphere_area(d) * float(np.sum(w * r ** (d - 1) * heat_kernel(spec, r, t))) if d > 1 \
                else 2.0 * float(np.sum(w * heat_kernel(spec, r, t)))
            report.add("heat_normalization", f"d={d},t={t:g}", total, 1.0, tol, _rel(total, 1.0) <= tol)

    # k_s * k_t = k_{s+t} in d = 1
    rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 11])
    spec1 = HeatKernelSpec(1.0, 1)
    worst = 0.0
    for _ in range(20):
        x = rng.uniform(-3.0, 3.0)
        s, t = 10.0 ** rng.uniform(-1.0, 1.0, size=2)
        half = 40.0 * math.sqrt(max(s, t)) + abs(x)
        z, w = panel_rule(np.linspace(-half, half, 401), 16)
        lhs = float(np.sum(w * heat_kernel(spec1, np.abs(x - z), s) * heat_kernel(spec1, np.abs(z), t)))
        rhs = heat_kernel(spec1, abs(x), s + t)
        worst = max(worst, _rel(lhs, rhs))
    tol = config.tolerance("kernel_semigroup")
    report.add("kernel_semigroup_property", "d=1,20 triples", worst, 0.0, tol, worst <= tol)

    # gradient bound over |x| <= 6 sqrt(t), t in 10^[lo, hi]
    lo, hi = P["t_exponents"]
    times = np.logspace(lo, hi, P["n_times"])
    tol = config.tolerance("grad_margin")
    for d in P["dims"]:
        spec = HeatKernelSpec(1.0, d)
        worst, violations, count = 0.0, 0, 0
        dirs = np.eye(d)[:1] if d == 1 else rng.normal(size=(16, d))
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        for t in times:
            r = np.linspace(0.0, 6.0 * math.sqrt(t), P["n_radii"])
            pts = (r[:, None, None] * dirs[None]).reshape(-1, d)
            m = np.atleast_1d(grad_bound_margin(spec, pts, t))
            worst = max(worst, float(m.max()))
            violations += int(np.count_nonzero(m > tol))
            count += m.size
        report.add("grad_bound_margin", f"d={d},points={count}", worst, 1.0, tol, violations == 0,
                   f"violations={violations}")

    for d in P["dims"]:
        for alpha in (0.5, 1.0) if d > 1 else (0.5,):
            ks = RieszKernelSpec(alpha, d)
            r = np.geomspace(1e-3, 1e3, 13)
            h = riesz_kernel(ks, r) * r ** (d - alpha)
            spread = float((h.max() - h.min()) / h.min())
            report.add("riesz_homogeneity", f"d={d},alpha={alpha:g}", spread, 0.0, 1e-12, spread <= 1e-12)

    for d in (1, 2):
        for y in (0.1, 1.0, 10.0):
            edges = np.concatenate([[0.0], np.geomspace(1e-3 * y, 1e9 * y, 121)])
            r, w = panel_rule(edges, 16)
            body = float(np.sum(w * sphere_area(d) * r ** (d - 1) * poisson_kernel(d, y, r))) if d > 1 \
                else 2.0 * float(np.sum(w * poisson_kernel(d, y, r)))
            # the kernel decays like r^(-d-1); add the analytic remainder
            c = math.gamma((d + 1) / 2.0) / math.pi ** ((d + 1) / 2.0)
            body += (sphere_area(d) if d > 1 else 2.0) * c * y / edges[-1]
            tol = config.tolerance("normalization")
            report.add("poisson_normalization", f"d={d},y={y:g}", body, 1.0, tol, _rel(body, 1.0) <= tol)


def run_semigroup(config, report):
    from .mixture import GaussianMixture
    from .semigroup import GridField, apply_heat, apply_heat_grid, default_t_grid, heat_values, maximal_norm_ratio, \
        ultracontractivity_constant
    P = config.params
    for d in P["dims"]:
        rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 21, d])
        family = [GaussianMixture.random(rng, d, signed=True) for _ in range(P["n_mixtures"])]
        probe = rng.uniform(-3.0, 3.0, size=(32, d))
        worst = 0.0
        for f in family:
            for s, t in ((0.3, 0.7), (1.0, 2.5), (0.01, 10.0)):
                lhs = apply_heat(apply_heat(f, s), t)(probe)
                rhs = apply_heat(f, s + t)(probe)
                worst = max(worst, float(np.max(np.abs(lhs - rhs)) / max(float(np.max(np.abs(rhs))), 1e-300)))
        tol = config.tolerance("semigroup_law")
        report.add("semigroup_law", f"d={d}", worst, 0.0, tol, worst <= tol)

        tol = config.tolerance("contraction")
        for p in (1.0, 2.0, np.inf):
            excess = -np.inf
            for f in family:
                n0 = f.lp_norm(p)
                for t in P["times"]:
                    excess = max(excess, f.heat(t).lp_norm(p) / n0 - 1.0)
            report.add("contraction", f"d={d},p={p:g}", excess, 0.0, tol, excess <= tol)

        pos = GaussianMixture(d, np.abs(family[0].amplitudes), family[0].centers, family[0].widths2)
        axis = np.linspace(-6.0, 6.0, 41 if d < 3 else 17)
        grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        low = float(np.min(heat_values(pos, grid, P["times"])))
        report.add("positivity", f"d={d}", low, 0.0, 0.0, low >= 0.0)

        n = P["grid_points"] if d == 1 else min(P["grid_points"], 64 if d == 2 else 32)
        f = family[0]
        G = GridField.from_function(f, d, 12.0, n)
        t = 0.5
        out = apply_heat_grid(G, t)
        mask = G.interior_mask()
        ref = f.heat(t)(G.points())
        err = float(np.max(np.abs(out.samples.reshape(-1) - ref)[mask.reshape(-1)]) / np.max(np.abs(ref)))
        tol = config.tolerance("spectral")
        report.add("spectral_agreement", f"d={d},n={n}", err, 0.0, tol, err <= tol)

        tol = config.tolerance("maximal_refinement")
        coarse, fine = default_t_grid(401), default_t_grid(801)
        for p in P["ps"]:
            worst_c, worst_change = 0.0, 0.0
            for f in family:
                r1 = maximal_norm_ratio(f, p, t_grid=coarse)
                r2 = maximal_norm_ratio(f, p, t_grid=fine)
                worst_c = max(worst_c, r2)
                worst_change = max(worst_change, _rel(r1, r2))
            ok = math.isfinite(worst_c) and worst_change <= tol
            report.add("maximal_ratio", f"d={d},p={p:g}", worst_c, worst_change, tol, ok,
                       "value=max ratio; reference=refinement change")
            report.constants[f"D_p[d={d},p={p:g}]"] = worst_c
        for p in P["ps"]:
            report.constants[f"ultracontractivity[d={d},p={p:g},gauss]"] = ultracontractivity_constant(
                GaussianMixture.gaussian(d), p)


def run_frac(config, report):
    from .fractional import (FractionalParams, MellinQuadrature, deterministic_projection, gaussian_fractional_closed_form,
                             hls_majorization, mellin_fractional_integral, projection_constant_candidates,
                             riesz_convolution_oracle)
    from .mixture import GaussianMixture
    from .semigroup import ultracontractivity_constant
    P = config.params
    tol = config.tolerance("oracle")
    for d in P["dims"]:
        alphas = [a for a in P["alphas"] if 0 < a < d]
        if d == 3 and 2.0 not in alphas:
            alphas.append(2.0)
        for alpha in alphas:
            rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 31, d, int(alpha * 1000)])
            worst = 0.0
            for _ in range(P["n_mixtures"]):
                f = GaussianMixture.random(rng, d, signed=False)
                x = rng.uniform(-3.0, 3.0, size=(P["n_points"], d))
                v = [np.atleast_1d(fn(f, alpha, x)) for fn in
                     (mellin_fractional_integral, riesz_convolution_oracle, gaussian_fractional_closed_form)]
                for i in range(3):
                    for j in range(i + 1, 3):
                        worst = max(worst, float(np.max(np.abs(v[i] - v[j]) / np.abs(v[j]))))
            report.add("triple_oracle", f"d={d},alpha={alpha:g}", worst, 0.0, tol, worst <= tol)
    if 3 in P["dims"]:
        val = float(mellin_fractional_integral(GaussianMixture.gaussian(3), 2.0, np.zeros(3)))
        report.add("forced_value", "I_2 gauss(0), d=3", val, 2.0, tol, _rel(val, 2.0) <= tol)

    rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 32])
    worst_h, worst_lin = 0.0, 0.0
    for d in P["dims"]:
        alpha = min(0.5, d / 2.0)
        f, g = GaussianMixture.random(rng, d), GaussianMixture.random(rng, d)
        x = rng.uniform(-2.0, 2.0, size=(4, d))
        lam = 2.0
        lhs = np.atleast_1d(mellin_fractional_integral(f.dilated(lam), alpha, x))
        rhs = lam ** (-alpha) * np.atleast_1d(mellin_fractional_integral(f, alpha, lam * x))
        worst_h = max(worst_h, float(np.max(np.abs(lhs / rhs - 1.0))))
        comb = f.scaled(2.0) + g.scaled(-3.0)
        # one rule wide enough for all three, so linearity is exact up to rounding
        rules = [MellinQuadrature.for_tolerance(h, alpha, 1e-10) for h in (f, g, comb)]
        quad = MellinQuadrature(min(q.t_min for q in rules), max(q.t_max for q in rules),
                                max(q.panels for q in rules), max(q.nodes_per_panel for q in rules))
        lin = 2.0 * np.atleast_1d(mellin_fractional_integral(f, alpha, x, quad=quad)) - 3.0 * np.atleast_1d(
            mellin_fractional_integral(g, alpha, x, quad=quad))
        both = np.atleast_1d(mellin_fractional_integral(comb, alpha, x, quad=quad))
        worst_lin = max(worst_lin, float(np.max(np.abs(both - lin)) / np.max(np.abs(both))))
    tol = config.tolerance("homogeneity")
    report.add("homogeneity", "lambda=2", worst_h, 0.0, tol, worst_h <= tol)
    report.add("linearity", "2f - 3g", worst_lin, 0.0, 1e-12, worst_lin <= 1e-12)

    f = GaussianMixture.gaussian(1)
    v1 = float(mellin_fractional_integral(f, 0.5, 0.3, tol=1e-6))
    v2 = float(mellin_fractional_integral(f, 0.5, 0.3, tol=5e-7))
    report.add("tail_certificate", "tol 1e-6 -> 5e-7", abs(v1 - v2), 0.0, 1e-6, abs(v1 - v2) < 1e-6)

    # pointwise majorization at sampled (f, x) pairs
    n_pairs = P["majorization_pairs"]
    if n_pairs:
        holds, worst = 0, 0.0
        rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 33])
        dims = [d for d in P["dims"] if d >= 1]
        per_f = 5
        cu_cache = {}
        for k in range(n_pairs):
            d = dims[(k // per_f) % len(dims)]
            if k % per_f == 0:
                f = GaussianMixture.random(rng, d, signed=True)
                alpha = 0.5
                p = 1.5 if d / alpha > 1.5 else 1.0 + 0.5 * (d / alpha - 1.0)
                params = FractionalParams(alpha, p, d)
                cu_cache = {"cu": ultracontractivity_constant(f, p)}
            x = rng.uniform(-3.0, 3.0, size=d)
            rec = hls_majorization(f, params, x, ultracontractivity=cu_cache["cu"])
            holds += rec.holds
            worst = max(worst, abs(rec.I_value) / rec.combined_bound)
        report.add("majorization", f"pairs={n_pairs}", holds / n_pairs, 1.0, 0.0, holds == n_pairs,
                   f"worst |I f| / bound = {worst:.6g}")

    tol = config.tolerance("projection_change")
    a_lo, a_hi = min(P["projection_a"]), max(P["projection_a"])
    for d in sorted(set(P["dims"]) & {1, 3}):
        f = GaussianMixture.gaussian(d)
        for alpha in [a for a in P["alphas"] if 0 < a < d]:
            x = np.zeros(d) if d > 1 else 0.0
            ref = float(mellin_fractional_integral(f, alpha, x))
            r_lo = float(deterministic_projection(f, alpha, a_lo, x)) / ref
            r_hi = float(deterministic_projection(f, alpha, a_hi, x)) / ref
            change = _rel(r_hi, r_lo)
            report.add("projection_convergence", f"d={d},alpha={alpha:g},a={a_lo:g}->{a_hi:g}",
                       r_hi, r_lo, tol, change < tol, f"relative change {change:.6g}")
            for name, val in projection_constant_candidates(alpha).items():
                report.constants[f"projection_constant[alpha={alpha:g},{name}]"] = val
            report.constants[f"projection_ratio[d={d},alpha={alpha:g},a={a_hi:g}]"] = r_hi


def run_mc(config, report):
    from . import martingale as mg
    from .fractional import deterministic_projection
    from .mixture import GaussianMixture
    P = config.params
    f = GaussianMixture.gaussian(1)
    a, alpha = P["a"], P["alpha"]
    z = config.tolerance("z_limit")
    cfg = mg.EnsembleConfig(1, a, P["M"], P["N"], mg.default_box_half_width(f, a), config.seed,
                            cell_budget=P["cell_budget"])
    ens = mg.sample_paths(cfg)
    times = a * np.array([0.0, 0.25, 0.5, 0.75, 0.9, 0.99])
    checkpoints = np.unique(np.searchsorted(ens.time_grid, times))
    rec = mg.martingale_transform(ens, f, alpha, checkpoints=checkpoints, threads=config.worker_threads)

    sub = mg.differential_subordination_check(rec)
    report.add("differential_subordination", f"checks={sub.checks}", sub.fraction_satisfied, 1.0, 0.0,
               sub.fraction_satisfied == 1.0, f"worst margin {sub.worst_margin:.6g}")

    x = np.asarray(P["x_points"], dtype=float)
    try:
        proj = mg.conditional_projection(rec, x, bandwidth=P["bandwidth"])
        exact = np.atleast_1d(deterministic_projection(f, alpha, a, x.reshape(-1, 1)))
        for xi, est, se, ex in zip(x, proj.estimate, proj.std_error, exact):
            zs = (est - ex) / se
            report.add("conditional_projection", f"x={xi:g}", est, ex, z, abs(zs) <= z, f"z={zs:.4g}, se={se:.6g}")
    except CoverageError as exc:
        report.fail("conditional_projection", f"N={P['N']}", exc)

    for p in P["ps"]:
        res = mg.doob_check(rec, f, p)
        report.add("doob", f"p={p:g}", res.lhs, res.bound * res.rhs, z, res.satisfied,
                   f"se={res.lhs_se:.6g}")
        zt = (res.terminal_moment - res.rhs) / res.terminal_se if res.terminal_se > 0 else 0.0
        report.add("terminal_moment", f"p={p:g}", res.terminal_moment, res.rhs, z, abs(zt) <= z, f"z={zt:.4g}")
        report.constants[f"doob_bound[p={p:g}]"] = res.bound

    second, se2 = mg.weighted_total(rec.weights, rec.M_alpha_a ** 2)
    oracle = mg.ito_isometry_grid(f, alpha, rec.time_grid)
    zi = (second - oracle) / se2 if se2 > 0 else 0.0
    report.add("ito_isometry", f"a={a:g},alpha={alpha:g}", second, oracle, z, abs(zi) <= z, f"z={zi:.4g}")

    for q in P["qs"]:
        bg = mg.burkholder_gundy_ratio(rec, q)
        report.add("burkholder_gundy", f"q={q:g}", bg.ratio, float("nan"), float("nan"),
                   math.isfinite(bg.ratio) and bg.ratio > 0, f"se={bg.std_error:.6g}")
        report.constants[f"bg_ratio[q={q:g}]"] = bg.ratio

    mt = mg.martingale_property_check(rec, "martingale", z_limit=z)
    report.add("martingale_property", f"cells={mt.cells}", mt.max_abs_z, 0.0, z, mt.passed)

    p_nd = 0.5 * (1.0 + 1.0 / alpha)
    nd = mg.lemma_newdelta_check(rec, f, p_nd, alpha, P["delta"])
    report.add("newdelta", f"p={p_nd:g},delta={P['delta']:g}", nd.fraction_satisfied, 1.0, 0.0,
               nd.fraction_satisfied == 1.0, f"C1={nd.C1:.6g}, C2={nd.C2:.6g}")


def run_subord(config, report):
    from . import subordination as sb
    from .kernels import poisson_kernel
    from .mixture import GaussianMixture
    P = config.params
    tol = config.tolerance("poisson")
    r = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 16)])
    for d in P["dims"]:
        for t in P["times"]:
            err = float(np.max(sb.poisson_comparison(d, t, r)))
            report.add("poisson_closed_form", f"d={d},t={t:g}", err, 0.0, tol, err <= tol)
    tol = config.tolerance("laplace")
    for beta in P["betas"]:
        for t in P["times"]:
            spec = sb.StableSpec(beta, t)
            mass = float(sb.laplace_transform(spec, 0.0))
            report.add("density_normalization", f"beta={beta:g},t={t:g}", mass, 1.0, tol, _rel(mass, 1.0) <= tol)
            worst = max(_rel(float(sb.laplace_transform(spec, y)), math.exp(-t * y ** beta)) for y in P["ys"])
            report.add("laplace_round_trip", f"beta={beta:g},t={t:g}", worst, 0.0, tol, worst <= tol)
    for beta in P["betas"]:
        methods = [sb.TALBOT] + ([sb.CLOSED_FORM_HALF] if beta == 0.5 else [])
        for method in methods:
            tol = config.tolerance("scaling_closed" if method == sb.CLOSED_FORM_HALF else "scaling")
            worst = 0.0
            spec = sb.StableSpec(beta, 1.0, method)
            for b in (0.5, 2.0, 3.0):
                for u in (0.3, 1.0, 4.0):
                    worst = max(worst, sb.scaling_check(spec, b, u).rel_err)
            report.add("scaling_identity", f"beta={beta:g},{method}", worst, 0.0, tol, worst <= tol)
    tol = config.tolerance("chapman")
    if 1 in P["dims"]:
        configs = [(0.5, 0.5, 1.0, 0.0, 0.7), (0.3, 1.0, 0.5, 0.2, -0.4), (0.7, 0.5, 0.5, 0.0, 1.5),
                   (0.5, 2.0, 1.0, -1.0, 1.0), (0.7, 1.0, 2.0, 0.3, 0.3)]
        worst = max(sb.chapman_kolmogorov_check(*c)[2] for c in configs)
        report.add("chapman_kolmogorov", "d=1,5 configurations", worst, 0.0, tol, worst <= tol)
    tol = config.tolerance("fit_ratio")
    for beta in P["betas"]:
        for d in P["dims"]:
            try:
                fit = sb.estimate_fit(beta, d)
                ok = math.isfinite(fit.C1) and math.isfinite(fit.C2) and fit.spread <= tol
                report.add("two_sided_fit", f"beta={beta:g},d={d}", fit.spread, 0.0, tol, ok,
                           f"C1={fit.C1:.6g}, C2={fit.C2:.6g}")
            except FrihlsError as exc:
                report.fail("two_sided_fit", f"beta={beta:g},d={d}", exc)
    f = GaussianMixture.gaussian(1)
    target = -math.sqrt(2.0 / math.pi)
    val = float(sb.fractional_laplacian_apply(f, 0.5, 0.0))
    tol = config.tolerance("laplacian")
    report.add("fractional_laplacian", "d=1,beta=0.5,x=0", val, target, tol, _rel(val, target) <= tol)
    gen = float(sb.generator_oracle(f, 0.5, 0.0))
    tol = config.tolerance("generator")
    report.add("generator_oracle", "d=1,beta=0.5,x=0", gen, val, tol, _rel(gen, val) <= tol)
    for d in P["dims"]:
        report.constants[f"laplacian_constant_factor[beta=0.5,d={d}]"] = sb.constant_factor(0.5, d)


def run_hls(config, report):
    from . import hls
    from . import martingale as mg
    from .fractional import FractionalParams
    from .mixture import GaussianMixture
    from .semigroup import maximal_norm_ratio
    P = config.params
    sc = hls.SweepConfig(dims=P["dims"], alphas=P["alphas"], ps=P["ps"], family_size=P["family_size"],
                         seed=config.seed, methods=P["methods"], agreement_tol=config.tolerance("agreement"))
    extra = {}
    for d in P["dims"]:
        for p in P["ps"]:
            extra[f"D_p[d={d},p={p:g},gauss]"] = maximal_norm_ratio(GaussianMixture.gaussian(d), p)
    if P["bg_paths"]:
        f = GaussianMixture.gaussian(1)
        cfg = mg.EnsembleConfig(1, 10.0, 128, P["bg_paths"], mg.default_box_half_width(f, 10.0), config.seed)
        rec = mg.martingale_transform(mg.sample_paths(cfg), f, 0.5, threads=config.worker_threads)
        for q in P["bg_qs"]:
            extra[f"bg_ratio[q={q:g}]"] = mg.burkholder_gundy_ratio(rec, q).ratio
    rep = hls.sweep(sc, extra_constants=extra)
    report.attachment = rep
    report.constants.update(rep.constants)
    for key, cell in sorted(rep.cells.items()):
        report.add("sweep_cell", key, cell.get("empirical_C", float("nan")), float("nan"),
                   config.tolerance("agreement"), cell["status"] == "ok",
                   f"max cross-method {cell.get('max_cross_method_rel', float('nan')):.3g}")
    family_cache = {d: hls.function_family(d, max(P["family_size"], 2), config.seed) for d in P["dims"]}
    for d in P["dims"]:
        for alpha in P["alphas"]:
            for p in P["ps"]:
                params = FractionalParams(alpha, p, d)
                key = f"d={d},alpha={alpha:g},p={p:g}"
                fam = family_cache[d][:3]
                tol = config.tolerance("dilation")
                worst = max(hls.dilation_invariance_check(f, params, P["lambdas"]).max_rel_spread for _, f in fam)
                report.add("dilation_invariance", key, worst, 0.0, tol, worst <= tol)
                tol = config.tolerance("wrong_exponent")
                qw = params.q * P["wrong_q_factor"]
                worst = max(max(hls.dilation_invariance_check(f, params, P["lambdas"], q=qw).multiplier_errors)
                            for _, f in fam)
                report.add("wrong_exponent_scaling", key, worst, 0.0, tol, worst <= tol)
                n = P["family_size"]
                if n >= 2:
                    half = rep.cells.get(key, {}).get("running_max", [])
                    if len(half) >= n:
                        c_half, c_full = half[n // 2 - 1], half[n - 1]
                        tol = config.tolerance("family_stability")
                        report.add("family_stability", key, c_full, c_half, tol, _rel(c_full, c_half) <= tol)


BATTERIES = {
    "kernels": run_kernels,
    "semigroup": run_semigroup,
    "frac": run_frac,
    "mc": run_mc,
    "subord": run_subord,
    "hls": run_hls,
}


def run_battery(config):
    """Run the battery for ``config.command``; budget overruns end the run
    with ``truncated = True`` and the checks gathered so far."""
    report = BatteryReport(config.command, config.seed, _jsonable(config_contents(config)))
    try:
        BATTERIES[config.command](config, report)
    except BudgetError as exc:
        report.truncated = True
        report.fail("budget", config.command, exc)
    except FrihlsError as exc:
        report.fail("battery", config.command, exc)
    return report


def config_contents(config):
    """The config as embedded in reports: without output location or thread
    count, neither of which may change the results."""
    d = config.to_dict()
    d.pop("output_dir")
    d.pop("threads")
    return d


def exit_status(report):
    if report.truncated:
        return 2
    return 0 if report.passed else 1
