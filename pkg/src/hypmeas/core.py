"""Concavity parameters, extended reals and generalized means.

Every other module expresses concavity through :class:`AlphaParam` and
compares masses or density values with :func:`generalized_mean`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import total_ordering

import numpy as np

from .errors import ConstructionError, DomainError

__all__ = [
    "ExtReal",
    "NEG_INF",
    "POS_INF",
    "as_ext",
    "AlphaParam",
    "as_alpha",
    "AffineForm",
    "generalized_mean",
    "beta_from_alpha",
    "alpha_from_beta",
]

# |alpha| below this uses the geometric mean with a first-order correction
_GEOMETRIC_BAND = 1e-6
# slack when comparing alpha against 1/k
_RECIPROCAL_TOL = 1e-12


@total_ordering
@dataclass(frozen=True)
class ExtReal:
    """A point of the extended line [-inf, +inf] with tagged infinities.

    Infinite values never travel as IEEE infinities inside the library, so
    the branches for ``-inf`` and ``+inf`` are exact.
    """

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("neg_inf", "finite", "pos_inf"):
            raise ConstructionError(f"unknown extended-real kind {self.kind!r}")
        if self.kind == "finite" and not math.isfinite(self.value):
            raise ConstructionError("finite ExtReal needs a finite value")

    @classmethod
    def finite(cls, x: float) -> "ExtReal":
        return cls("finite", float(x))

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def is_neg_inf(self) -> bool:
        return self.kind == "neg_inf"

    @property
    def is_pos_inf(self) -> bool:
        return self.kind == "pos_inf"

    def __float__(self) -> float:
        if self.kind == "neg_inf":
            return -math.inf
        if self.kind == "pos_inf":
            return math.inf
        return self.value

    def _key(self):
        order = {"neg_inf": 0, "finite": 1, "pos_inf": 2}[self.kind]
        return (order, self.value if self.kind == "finite" else 0.0)

    def __lt__(self, other):
        other = as_ext(other)
        return self._key() < other._key()

    def __eq__(self, other):
        try:
            other = as_ext(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        if self.kind == "finite":
            return f"ExtReal({self.value!r})"
        return "ExtReal(-inf)" if self.is_neg_inf else "ExtReal(+inf)"

    def to_json(self):
        if self.kind == "finite":
            return self.value
        return "-inf" if self.is_neg_inf else "inf"


NEG_INF = ExtReal("neg_inf")
POS_INF = ExtReal("pos_inf")


def as_ext(x) -> ExtReal:
    """Coerce floats, strings ('-inf', 'inf') and AlphaParam to ExtReal."""
    if isinstance(x, ExtReal):
        return x
    if isinstance(x, AlphaParam):
        return x.ext
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("-inf", "-infinity"):
            return NEG_INF
        if s in ("inf", "+inf", "infinity"):
            return POS_INF
        x = float(s)
    x = float(x)
    if math.isnan(x):
        raise DomainError("NaN is not an extended real")
    if x == -math.inf:
        return NEG_INF
    if x == math.inf:
        return POS_INF
    return ExtReal.finite(x)


@dataclass(frozen=True)
class AlphaParam:
    """Concavity parameter alpha in [-inf, 1].

    ``alpha = -inf`` is the hyperbolic (convex) class, ``alpha = 0`` the
    log-concave class and ``alpha = 1/n`` the Lebesgue class on n-dim bodies.
    """

    ext: ExtReal

    def __post_init__(self):
        if self.ext.is_pos_inf or (self.ext.is_finite and self.ext.value > 1.0):
            raise DomainError(f"alpha must not exceed 1, got {self.ext!r}")

    @classmethod
    def of(cls, x) -> "AlphaParam":
        return x if isinstance(x, AlphaParam) else cls(as_ext(x))

    @property
    def value(self) -> float:
        return float(self.ext)

    @property
    def is_neg_inf(self) -> bool:
        return self.ext.is_neg_inf

    @property
    def is_zero(self) -> bool:
        return self.ext.is_finite and self.ext.value == 0.0

    @property
    def needle_exponent(self) -> float | None:
        """Exponent (1 - alpha)/alpha of extreme needle densities.

        ``None`` for alpha = 0, where the profile is log-affine instead.
        """
        if self.is_neg_inf:
            return -1.0
        if self.is_zero:
            return None
        a = self.ext.value
        return (1.0 - a) / a

    def beta(self, k: int) -> ExtReal:
        return beta_from_alpha(self, k)

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"AlphaParam({self.ext.to_json()!r})"

    def to_json(self):
        return self.ext.to_json()


def as_alpha(x) -> AlphaParam:
    return AlphaParam.of(x)


@dataclass(frozen=True)
class AffineForm:
    """The map ``x -> constant + gradient . x``."""

    constant: float
    gradient: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gradient, dtype=float))
        if g.ndim != 1:
            raise ConstructionError("gradient must be a vector")
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def dim(self) -> int:
        return self.gradient.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.constant + x @ self.gradient


def _validate_mean_args(a, b, t):
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("generalized_mean needs a >= 0 and b >= 0")
    if np.any((t < 0) | (t > 1)) or np.any(np.isnan(t)):
        raise DomainError("generalized_mean needs t in [0, 1]")


def generalized_mean(a, b, t, alpha):
    """Weighted alpha-mean ``[(1-t) a^alpha + t b^alpha]^(1/alpha)``.

    Limit conventions: alpha = -inf gives min(a, b), alpha = +inf gives
    max(a, b), alpha = 0 gives a^(1-t) b^t. For alpha <= 0 the mean is 0 as
    soon as a or b vanishes. Inputs broadcast; scalar inputs give a float.
    """
    p = as_ext(alpha)
    scalar = all(np.ndim(v) == 0 for v in (a, b, t))
    a, b, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, t)))
    _validate_mean_args(a, b, t)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)

    if p.is_neg_inf:
        out = lo.copy()
    elif p.is_pos_inf:
        out = hi.copy()
    else:
        x = p.value
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            la = np.log(a)
            lb = np.log(b)
            both = (a > 0) & (b > 0)
            if x == 0.0:
                out = np.exp((1.0 - t) * la + t * lb)
            elif abs(x) < _GEOMETRIC_BAND:
                d = la - lb
                geo = np.exp((1.0 - t) * la + t * lb + 0.5 * x * t * (1.0 - t) * d * d)
                lse = np.logaddexp(np.log1p(-t) + x * la, np.log(t) + x * lb) / x
                out = np.where(both, geo, np.exp(lse))
            else:
                lse = np.logaddexp(np.log1p(-t) + x * la, np.log(t) + x * lb) / x
                out = np.exp(lse)
            if x <= 0.0:
                out = np.where(both, out, 0.0)
        out = np.clip(np.nan_to_num(out, nan=0.0), lo, hi)

    return float(out) if scalar else out


def beta_from_alpha(alpha, k: int) -> ExtReal:
    """Density exponent beta = alpha / (1 - alpha k) for a k-dim measure.

    ``alpha = 1/k`` maps to +inf (constant density) and ``alpha = -inf``
    maps to -1/k.
    """
    k = int(k)
    if k < 1:
        raise DomainError("dimension k must be a positive integer")
    a = as_ext(alpha)
    if a.is_neg_inf:
        return ExtReal.finite(-1.0 / k)
    if a.is_pos_inf:
        raise DomainError("alpha must not exceed 1/k")
    x = a.value
    denom = 1.0 - x * k
    if abs(denom) <= _RECIPROCAL_TOL:
        return POS_INF
    if denom < 0:
        raise DomainError(f"alpha={x} exceeds 1/k for k={k}")
    return ExtReal.finite(x / denom)


def alpha_from_beta(beta, k: int) -> AlphaParam:
    """Inverse of :func:`beta_from_alpha`: alpha = beta / (1 + beta k)."""
    k = int(k)
    if k < 1:
        raise DomainError("dimension k must be a positive integer")
    b = as_ext(beta)
    if b.is_pos_inf:
        return AlphaParam(ExtReal.finite(1.0 / k))
    if b.is_neg_inf:
        raise DomainError("beta must be at least -1/k")
    y = b.value
    denom = 1.0 + y * k
    if abs(denom) <= _RECIPROCAL_TOL:
        return AlphaParam(NEG_INF)
    if denom < 0:
        raise DomainError(f"beta={y} is below -1/k for k={k}")
    return AlphaParam(ExtReal.finite(y / denom))
