"""Finite linear combinations of isotropic Gaussian bumps.

A term ``(A, c, v)`` is the function ``A * exp(-|x - c|^2 / (2 v))``; ``v`` is
the squared width. The heat semigroup maps the family to itself, so every
semigroup quantity used downstream has a closed form.
"""

import math

import numpy as np
from scipy import integrate, optimize

from ._validation import check_dim, check_points, check_positive, squeeze
from .errors import DomainError


class GaussianMixture:
    """Immutable mixture of isotropic Gaussians in ``dim`` dimensions.

    Parameters
    ----------
    dim : int
        Ambient dimension ``d``.
    amplitudes : array-like of shape (K,)
    centers : array-like of shape (K, d)
        For ``d = 1`` a flat sequence of length ``K`` is accepted.
    widths2 : array-like of shape (K,)
        Squared widths, all strictly positive.
    """

    __slots__ = ("dim", "amplitudes", "centers", "widths2")

    def __init__(self, dim, amplitudes, centers, widths2):
        dim = check_dim(dim)
        amps = np.atleast_1d(np.asarray(amplitudes, dtype=float))
        cen = np.asarray(centers, dtype=float)
        if dim == 1 and cen.ndim <= 1:
            cen = cen.reshape(-1, 1)
        cen = np.atleast_2d(cen)
        w2 = np.atleast_1d(np.asarray(widths2, dtype=float))
        if amps.ndim != 1 or amps.size < 1:
            raise DomainError("a mixture needs at least one term")
        if cen.shape != (amps.size, dim) or w2.shape != amps.shape:
            raise DomainError(
                f"inconsistent term shapes: amplitudes {amps.shape}, "
                f"centers {cen.shape}, widths2 {w2.shape} for dim {dim}"
            )
        if np.any(~np.isfinite(w2)) or np.any(w2 <= 0):
            raise DomainError("all squared widths must be strictly positive")
        if np.any(~np.isfinite(amps)) or np.any(~np.isfinite(cen)):
            raise DomainError("amplitudes and centers must be finite")
        for arr in (amps, cen, w2):
            arr.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "centers", cen)
        object.__setattr__(self, "widths2", w2)

    def __setattr__(self, name, value):
        raise AttributeError("GaussianMixture is immutable")

    @classmethod
    def gaussian(cls, dim, amplitude=1.0, center=None, width2=1.0):
        center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(dim, [amplitude], center.reshape(1, dim), [width2])

    @classmethod
    def random(cls, rng, dim, n_terms=None, center_box=2.0, width_range=(0.5, 1.5),
               amplitude_range=(0.5, 1.5), signed=True):
        """Draw a mixture with uniform centers, widths, magnitudes and random signs."""
        if n_terms is None:
            n_terms = int(rng.integers(1, 4))
        mags = rng.uniform(*amplitude_range, size=n_terms)
        if signed:
            mags = mags * rng.choice([-1.0, 1.0], size=n_terms)
        centers = rng.uniform(-center_box, center_box, size=(n_terms, dim))
        widths = rng.uniform(*width_range, size=n_terms)
        return cls(dim, mags, centers, widths ** 2)

    def __repr__(self):
        return f"GaussianMixture(dim={self.dim}, n_terms={self.n_terms})"

    def __eq__(self, other):
        if not isinstance(other, GaussianMixture):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.amplitudes, other.amplitudes)
            and np.array_equal(self.centers, other.centers)
            and np.array_equal(self.widths2, other.widths2)
        )

    __hash__ = None

    @property
    def n_terms(self):
        return self.amplitudes.size

    # -- algebra -----------------------------------------------------------

    def scaled(self, factor):
        return GaussianMixture(self.dim, self.amplitudes * factor, self.centers, self.widths2)

    def __add__(self, other):
        if not isinstance(other, GaussianMixture) or other.dim != self.dim:
            return NotImplemented
        return GaussianMixture(
            self.dim,
            np.concatenate([self.amplitudes, other.amplitudes]),
            np.vstack([self.centers, other.centers]),
            np.concatenate([self.widths2, other.widths2]),
        )

    def __neg__(self):
        return self.scaled(-1.0)

    def dilated(self, lam):
        """The mixture ``x -> f(lam * x)``."""
        lam = check_positive(lam, "lambda")
        return GaussianMixture(self.dim, self.amplitudes, self.centers / lam, self.widths2 / lam ** 2)

    def absolute(self):
        """Mixture with absolute amplitudes; dominates ``|f|`` pointwise."""
        return GaussianMixture(self.dim, np.abs(self.amplitudes), self.centers, self.widths2)

    def heat(self, t, sigma=1.0):
        """Closed-form heat flow ``T_t f`` with diffusion scale ``sigma``."""
        if t < 0:
            raise DomainError(f"heat time must be >= 0, got {t}")
        if t == 0:
            return self
        v_new = self.widths2 + sigma ** 2 * t
        amps = self.amplitudes * (self.widths2 / v_new) ** (self.dim / 2.0)
        return GaussianMixture(self.dim, amps, self.centers, v_new)

    # -- pointwise evaluation ----------------------------------------------

    def _sq_dist(self, pts):
        diff = pts[:, None, :] - self.centers[None, :, :]
        return diff, np.einsum("mkd,mkd->mk", diff, diff)

    def __call__(self, x):
        pts, single = check_points(x, self.dim)
        _, r2 = self._sq_dist(pts)
        with np.errstate(under="ignore"):
            vals = np.exp(-r2 / (2.0 * self.widths2)) @ self.amplitudes
        return squeeze(vals, single)

    def gradient(self, x):
        pts, single = check_points(x, self.dim)
        diff, r2 = self._sq_dist(pts)
        with np.errstate(under="ignore"):
            w = self.amplitudes * np.exp(-r2 / (2.0 * self.widths2)) / self.widths2
        grad = -np.einsum("mk,mkd->md", w, diff)
        return grad[0] if single else grad

    def laplacian(self, x):
        pts, single = check_points(x, self.dim)
        _, r2 = self._sq_dist(pts)
        v = self.widths2
        with np.errstate(under="ignore"):
            g = self.amplitudes * np.exp(-r2 / (2.0 * v))
        vals = np.sum(g * (r2 / v ** 2 - self.dim / v), axis=1)
        return squeeze(vals, single)

    # -- integrals ---------------------------------------------------------

    @property
    def term_masses(self):
        return self.amplitudes * (2.0 * np.pi * self.widths2) ** (self.dim / 2.0)

    @property
    def mass(self):
        """``int f dx``."""
        return float(np.sum(self.term_masses))

    def centroid(self, absolute=True):
        """Mass-weighted centre; ``absolute`` weights by ``|mass|`` of each term."""
        m = self.term_masses
        w = np.abs(m) if absolute else m
        return (w @ self.centers) / np.sum(w)

    def bounding_box(self, n_widths=10.0):
        s = np.sqrt(self.widths2)[:, None]
        lo = np.min(self.centers - n_widths * s, axis=0)
        hi = np.max(self.centers + n_widths * s, axis=0)
        return lo, hi

    def gram(self, other, t=0.0):
        """``int T_t f * T_t g dx`` in closed form."""
        return float(np.sum(_pair_terms(self, other, t)[0]))

    def dirichlet(self, other, t=0.0):
        """``int grad T_t f . grad T_t g dx`` in closed form."""
        base, V, r2 = _pair_terms(self, other, t)
        return float(np.sum(base * (self.dim / V - r2 / V ** 2)))

    def lp_norm(self, p):
        """``||f||_p`` for ``p`` in ``[1, inf]`` by quadrature (closed form for p=2)."""
        if p == np.inf:
            return self.sup_norm()
        p = float(p)
        if p < 1:
            raise DomainError(f"p must be >= 1, got {p}")
        if p == 2.0:
            return math.sqrt(max(self.gram(self), 0.0))
        return _lp_quadrature(self, p) ** (1.0 / p)

    def sup_norm(self):
        """``max |f|`` by multi-start local maximisation from every center and
        from the best point of a global grid."""
        lo, hi = self.bounding_box(4.0)
        n = {1: 2001, 2: 161, 3: 41}.get(self.dim, 15)
        axes = [np.linspace(lo[i], hi[i], n) for i in range(self.dim)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        vals = np.abs(self(grid))
        starts = np.vstack([self.centers, grid[np.argmax(vals)][None, :]])
        best = float(np.max(vals))
        for sign in (1.0, -1.0):
            fun = lambda z, s=sign: -s * float(self(z.reshape(1, -1))[0])
            jac = lambda z, s=sign: -s * self.gradient(z.reshape(1, -1))[0]
            for x0 in starts:
                res = optimize.minimize(fun, x0, jac=jac, method="BFGS", options={"gtol": 1e-12})
                best = max(best, abs(float(res.fun)))
        return best


def _pair_terms(f, g, t):
    vf = f.widths2[:, None] + t
    vg = g.widths2[None, :] + t
    af = f.amplitudes[:, None] * (f.widths2[:, None] / vf) ** (f.dim / 2.0)
    ag = g.amplitudes[None, :] * (g.widths2[None, :] / vg) ** (g.dim / 2.0)
    V = vf + vg
    diff = f.centers[:, None, :] - g.centers[None, :, :]
    r2 = np.einsum("ijd,ijd->ij", diff, diff)
    base = af * ag * (2.0 * np.pi * vf * vg / V) ** (f.dim / 2.0) * np.exp(-r2 / (2.0 * V))
    return base, V, r2


def _lp_quadrature(f, p):
    if f.dim == 1:
        lo, hi = f.bounding_box(12.0)
        pts = sorted(set(np.round(f.centers[:, 0], 12)))
        fun = lambda z: abs(float(f(z))) ** p
        edges = [lo[0]] + [c for c in pts if lo[0] < c < hi[0]] + [hi[0]]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            total += integrate.quad(fun, a, b, limit=400, epsabs=0.0, epsrel=1e-12)[0]
        return total
    # trapezoid on a uniform grid is spectrally accurate for smooth |f|^p
    lo, hi = f.bounding_box(10.0 / math.sqrt(max(p, 1.0)) + 2.0)
    h = math.sqrt(np.min(f.widths2)) / (3.0 * max(1.0, math.sqrt(p)))
    axes = [np.arange(lo[i], hi[i] + h, h) for i in range(f.dim)]
    total = 0.0
    # slab-by-slab along the first axis keeps memory bounded
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, f.dim - 1)
    for x0 in axes[0]:
        pts = np.hstack([np.full((rest.shape[0], 1), x0), rest])
        total += np.sum(np.abs(f(pts)) ** p)
    return total * h ** f.dim
