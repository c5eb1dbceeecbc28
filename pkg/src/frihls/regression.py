"""Weighted Nadaraya-Watson regression with per-point standard errors."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import CoverageError, DomainError


def reference_bandwidth(X, sample_weight=None):
    """``1.06 * spread * N^(-1/5)`` with ``spread`` the weighted standard
    deviation averaged over coordinates."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    w = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    mean = w @ X / w.sum()
    spread = np.sqrt(w @ (X - mean) ** 2 / w.sum())
    return 1.06 * float(np.mean(spread)) * len(X) ** (-0.2)


class NadarayaWatson(RegressorMixin, BaseEstimator):
    """Gaussian-kernel local-constant regression.

    Parameters
    ----------
    bandwidth : float or None
        Kernel width; ``None`` selects :func:`reference_bandwidth` at fit time.
    min_samples : int
        Fewer training records raise :class:`CoverageError`.
    min_effective : float
        Minimum Kish effective sample size ``(sum k)^2 / sum k^2`` required at
        every prediction point.
    chunk : int
        Prediction points are processed in blocks of this size.
    """

    def __init__(self, bandwidth=None, min_samples=10_000, min_effective=100.0, chunk=16):
        self.bandwidth = bandwidth
        self.min_samples = min_samples
        self.min_effective = min_effective
        self.chunk = chunk

    def fit(self, X, y, sample_weight=None):
        X = check_array(np.asarray(X, dtype=float).reshape(len(X), -1))
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise DomainError("X and y lengths differ")
        if X.shape[0] < self.min_samples:
            raise CoverageError(f"{X.shape[0]} records, at least {self.min_samples} needed")
        w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        if np.any(w < 0):
            raise DomainError("sample weights must be nonnegative")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise DomainError("bandwidth must be > 0")
        self.bandwidth_ = float(self.bandwidth) if self.bandwidth is not None else reference_bandwidth(X, w)
        self.X_, self.y_, self.w_ = X, y, w
        self.n_features_in_ = X.shape[1]
        return self

    def _moments(self, Xq):
        check_is_fitted(self, "X_")
        Xq = np.asarray(Xq, dtype=float).reshape(-1, self.n_features_in_)
        h = self.bandwidth_
        mean = np.empty(Xq.shape[0])
        se = np.empty(Xq.shape[0])
        neff = np.empty(Xq.shape[0])
        for lo in range(0, Xq.shape[0], self.chunk):
            q = Xq[lo:lo + self.chunk]
            d2 = np.sum((q[:, None, :] - self.X_[None, :, :]) ** 2, axis=2)
            k = self.w_[None, :] * np.exp(-0.5 * d2 / (h * h))
            s0 = k.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                m = (k @ self.y_) / s0
                resid = self.y_[None, :] - m[:, None]
                var = np.sum(k * k * resid * resid, axis=1) / s0 ** 2
                ne = s0 ** 2 / np.sum(k * k, axis=1)
            mean[lo:lo + len(q)], se[lo:lo + len(q)], neff[lo:lo + len(q)] = m, np.sqrt(var), ne
        return Xq, mean, se, np.nan_to_num(neff)

    def predict_with_error(self, X):
        """Estimates, standard errors and effective sample sizes."""
        Xq, mean, se, neff = self._moments(X)
        starved = neff < self.min_effective
        if np.any(starved):
            pts = [tuple(p) for p in Xq[starved]]
            raise CoverageError(
                f"effective sample size below {self.min_effective:g} at {len(pts)} point(s)",
                starved_points=pts,
            )
        return mean, se, neff

    def predict(self, X):
        return self.predict_with_error(X)[0]
