"""scikit-learn style front end for needle fitting."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .core import as_alpha
from .needles import fit_needle, needle_cdf, needle_density, needle_sample

__all__ = ["NeedleEstimator"]


class NeedleEstimator(BaseEstimator):
    """Fit an extreme needle profile to points on (or near) a segment.

    Parameters
    ----------
    alpha : float or str
        Concavity parameter of the needle family (``<= 1/2`` or ``1``).
    endpoints : tuple of array-like, optional
        Segment ``(a, b)``. When omitted, points are projected on their
        principal axis and the segment spans the projections.
    clip : bool
        Clip an infeasible target mean to the achievable range instead of
        raising.

    Attributes
    ----------
    needle_ : Needle
    ks_distance_ : float
        Weighted Kolmogorov distance between data and fitted CDF.
    a_, b_ : ndarray
        Fitted segment endpoints.
    """

    def __init__(self, alpha=0.5, endpoints=None, clip=False):
        self.alpha = alpha
        self.endpoints = endpoints
        self.clip = clip

    def _to_t(self, X):
        d = self.b_ - self.a_
        return np.clip((X - self.a_) @ d / (d @ d), 0.0, 1.0)

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X, ensure_min_samples=100)
        as_alpha(self.alpha)
        if self.endpoints is not None:
            a, b = (np.atleast_1d(np.asarray(e, dtype=float)) for e in self.endpoints)
        else:
            center = X.mean(axis=0)
            _, _, vt = np.linalg.svd(X - center, full_matrices=False)
            e = vt[0]
            p = (X - center) @ e
            a, b = center + p.min() * e, center + p.max() * e
        self.a_, self.b_ = a, b
        self.n_features_in_ = X.shape[1]
        t = self._to_t(X)
        fit = fit_needle(t, self.alpha, weights=sample_weight, a=a, b=b, clip=self.clip)
        self.needle_ = fit.needle
        self.ks_distance_ = fit.ks_distance
        self.fit_ = fit
        return self

    def transform(self, X):
        """Segment parameters t in [0, 1] of the projected points."""
        check_is_fitted(self, "needle_")
        return self._to_t(check_array(X))[:, None]

    def cdf(self, X):
        check_is_fitted(self, "needle_")
        return needle_cdf(self.needle_, self._to_t(check_array(X)))

    def score_samples(self, X):
        """Log density along the segment, per unit length."""
        check_is_fitted(self, "needle_")
        t = self._to_t(check_array(X))
        length = float(np.linalg.norm(self.b_ - self.a_))
        with np.errstate(divide="ignore"):
            return np.log(needle_density(self.needle_, t)) - np.log(length)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "needle_")
        return needle_sample(self.needle_, n_samples, random_state)
