"""The Euclidean heat semigroup on Gaussian mixtures (exact) and on grid
fields (spectral), maximal functions, and ultracontractivity constants."""

import math
import struct

import numpy as np
from scipy import optimize

from ._validation import check_dim, check_points, check_positive, squeeze
from .errors import DomainError, PreconditionError
from .mixture import GaussianMixture
from .quadrature import radial_lq_integral

T_GRID_MIN = 1e-4
T_GRID_MAX = 1e4
GRID_MAGIC = b"GRIDFLD1"
GRID_HEADER_SIZE = 32


def default_t_grid(n=801, lo=T_GRID_MIN, hi=T_GRID_MAX):
    return np.geomspace(lo, hi, n)


def apply_heat(f, t, sigma=1.0):
    """``T_t f`` for a Gaussian mixture; each term keeps its center and gains
    variance ``sigma^2 t``."""
    if not isinstance(f, GaussianMixture):
        raise TypeError("apply_heat expects a GaussianMixture")
    check_positive(t, "t", strict=False)
    check_positive(sigma, "sigma")
    return f.heat(float(t), sigma)


def heat_values(f, x, t, sigma=1.0):
    """``T_t f(x)`` for every time in ``t`` and point in ``x``; shape ``(m, nt)``."""
    pts, _ = check_points(x, f.dim)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    diff = pts[:, None, :] - f.centers[None, :, :]
    r2 = np.einsum("mkd,mkd->mk", diff, diff)
    v = f.widths2[None, :] + sigma ** 2 * t[:, None]
    amp = f.amplitudes[None, :] * (f.widths2[None, :] / v) ** (f.dim / 2.0)
    with np.errstate(under="ignore"):
        return np.einsum("tk,mtk->mt", amp, np.exp(-r2[:, None, :] / (2.0 * v[None, :, :])))


class GridField:
    """Samples of a function on the periodic grid ``x_j = -L + j h``,
    ``h = 2L/n``, in ``dim <= 3`` dimensions. Immutable."""

    __slots__ = ("dim", "half_width", "points_per_axis", "samples")

    def __init__(self, dim, half_width, points_per_axis, samples):
        dim = check_dim(dim, max_dim=3)
        half_width = check_positive(half_width, "half_width")
        n = int(points_per_axis)
        if n < 2 or n & (n - 1):
            raise DomainError(f"points_per_axis must be a power of two, got {points_per_axis}")
        arr = np.array(samples, dtype=float, copy=True)
        if arr.size != n ** dim:
            raise DomainError(f"expected {n ** dim} samples, got {arr.size}")
        arr = arr.reshape((n,) * dim)
        arr.setflags(write=False)
        for name, value in zip(self.__slots__, (dim, half_width, n, arr)):
            object.__setattr__(self, name, value)

    def __setattr__(self, name, value):
        raise AttributeError("GridField is immutable")

    @classmethod
    def from_function(cls, func, dim, half_width, points_per_axis):
        tmp = cls(dim, half_width, points_per_axis, np.zeros(points_per_axis ** dim))
        return cls(dim, half_width, points_per_axis, np.asarray(func(tmp.points())).reshape(-1))

    def with_samples(self, samples):
        return GridField(self.dim, self.half_width, self.points_per_axis, samples)

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def axis(self):
        return -self.half_width + self.spacing * np.arange(self.points_per_axis)

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    def points(self):
        axes = [self.axis] * self.dim
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def center_index(self):
        return (self.points_per_axis // 2,) * self.dim

    def interior_mask(self, fraction=0.5):
        ax = np.abs(self.axis) <= fraction * self.half_width
        mask = ax
        for _ in range(self.dim - 1):
            mask = np.logical_and.outer(mask, ax)
        return mask

    def wavenumber_sq(self, real=False):
        """``|xi|^2`` on the (r)FFT frequency grid, broadcastable."""
        n, h = self.points_per_axis, self.spacing
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        ks = [k] * self.dim
        if real:
            ks[-1] = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
        grids = np.meshgrid(*ks, indexing="ij", sparse=True)
        return sum(g ** 2 for g in grids)

    def boundary_max(self):
        s = np.abs(self.samples)
        best = 0.0
        for ax in range(self.dim):
            best = max(best, float(np.max(np.take(s, 0, axis=ax))), float(np.max(np.take(s, -1, axis=ax))))
        return best

    def check_decay(self, rel=1e-12):
        top = float(np.max(np.abs(self.samples)))
        bmax = self.boundary_max()
        if top > 0 and bmax > rel * top:
            raise PreconditionError(
                f"field does not decay on the boundary shell: boundary max {bmax:.3e} "
                f"exceeds {rel:g} * max|samples| = {rel * top:.3e}"
            )

    def lp_norm(self, p):
        s = np.abs(self.samples)
        if p == np.inf:
            return float(np.max(s))
        return float((np.sum(s ** p) * self.cell_volume) ** (1.0 / p))

    def apply_multiplier(self, symbol):
        """Multiply the rFFT coefficients by ``symbol(|xi|^2)``."""
        axes = tuple(range(self.dim))
        coef = np.fft.rfftn(self.samples, axes=axes)
        coef *= symbol(self.wavenumber_sq(real=True))
        return self.with_samples(np.fft.irfftn(coef, s=self.samples.shape, axes=axes))

    # -- serialization -------------------------------------------------------

    def to_bytes(self):
        header = GRID_MAGIC + f"{self.dim:>4d}".encode() + f"{self.points_per_axis:>8d}".encode()
        header += _fixed_decimal(self.half_width, 12).encode()
        assert len(header) == GRID_HEADER_SIZE
        return header + np.ascontiguousarray(self.samples, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob):
        if len(blob) < GRID_HEADER_SIZE or blob[:8] != GRID_MAGIC:
            raise ValueError("not a GRIDFLD1 blob")
        dim = int(blob[8:12].decode())
        n = int(blob[12:20].decode())
        half_width = float(blob[20:32].decode())
        data = np.frombuffer(blob, dtype="<f8", offset=GRID_HEADER_SIZE)
        if data.size != n ** dim:
            raise ValueError(f"payload holds {data.size} values, header promises {n ** dim}")
        return cls(dim, half_width, n, data)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def __eq__(self, other):
        if not isinstance(other, GridField):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.half_width == other.half_width
            and self.points_per_axis == other.points_per_axis
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


def _fixed_decimal(value, width):
    for prec in range(17, 0, -1):
        text = f"{value:.{prec}g}"
        if len(text) <= width:
            return text.rjust(width)
    raise ValueError(f"{value!r} does not fit in {width} characters")


def apply_heat_grid(F, t, sigma=1.0):
    """Spectral heat flow: Fourier coefficients times ``exp(-t sigma^2 |xi|^2 / 2)``."""
    check_positive(t, "t", strict=False)
    F.check_decay()
    if t == 0:
        return F
    c = t * sigma ** 2 / 2.0
    return F.apply_multiplier(lambda k2: np.exp(-c * k2))


def maximal_function(f, x, t_grid=None):
    """``max |T_t f(x)|`` over ``t`` in ``t_grid`` together with ``t = 0``."""
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise DomainError("t_grid must be nonempty")
    if np.any(t_grid <= 0):
        raise DomainError("t_grid must contain positive times")
    if t_grid.min() > T_GRID_MIN * (1 + 1e-12) or t_grid.max() < T_GRID_MAX * (1 - 1e-12):
        raise DomainError(f"t_grid must span at least [{T_GRID_MIN:g}, {T_GRID_MAX:g}]")
    pts, single = check_points(x, f.dim)
    out = np.empty(pts.shape[0])
    step = max(1, 2_000_000 // (t_grid.size * f.n_terms))
    for lo in range(0, pts.shape[0], step):
        chunk = pts[lo:lo + step]
        vals = np.abs(heat_values(f, chunk, t_grid))
        out[lo:lo + step] = np.maximum(np.max(vals, axis=1), np.abs(f(chunk)))
    return squeeze(out, single)


def ultracontractivity_constant(f, p, t_grid=None, sigma=1.0, refine=True):
    """``sup_t t^(d/(2p)) ||T_t f||_inf / ||f||_p`` over ``t_grid``.

    With ``refine`` the grid maximiser is polished by a bounded scalar search
    in ``log t`` between its neighbours.
    """
    p = float(p)
    if not 1.0 <= p < np.inf:
        raise DomainError(f"p must lie in [1, inf), got {p}")
    norm_p = f.lp_norm(p)
    if norm_p == 0:
        raise DomainError("ultracontractivity ratio is undefined for the zero function")
    t_grid = np.geomspace(1e-4, 1e4, 81) if t_grid is None else np.asarray(t_grid, dtype=float)
    d = f.dim

    def ratio(t):
        return t ** (d / (2.0 * p)) * f.heat(t, sigma).sup_norm() / norm_p

    vals = np.array([ratio(t) for t in t_grid])
    i = int(np.argmax(vals))
    best = float(vals[i])
    if refine and t_grid.size > 2:
        lo = math.log(t_grid[max(i - 1, 0)])
        hi = math.log(t_grid[min(i + 1, t_grid.size - 1)])
        if hi > lo:
            res = optimize.minimize_scalar(lambda u: -ratio(math.exp(u)), bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-6})
            best = max(best, -float(res.fun))
    return best


def maximal_norm_ratio(f, p, t_grid=None, r_max=40.0, n_dirs=48):
    """``||f*||_p / ||f||_p`` (the Stein maximal ratio), by radial quadrature of
    ``f*`` about the mixture centroid with a fitted power-law tail."""
    p = float(p)
    if p <= 1:
        raise DomainError("the maximal ratio needs p > 1")
    t_grid = default_t_grid() if t_grid is None else t_grid
    center = f.centroid()
    spread = float(np.max(np.linalg.norm(f.centers - center, axis=1) + 3 * np.sqrt(f.widths2)))
    symmetric = f.n_terms == 1 or np.allclose(f.centers, f.centers[0])
    integral, _, _ = radial_lq_integral(
        lambda pts: maximal_function(f, pts, t_grid), center, f.dim, p, spread, r_max,
        n_dirs=1 if symmetric else n_dirs, panels=36, n=10,
    )
    return integral ** (1.0 / p) / f.lp_norm(p)
