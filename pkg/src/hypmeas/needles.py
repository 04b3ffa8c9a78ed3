"""One-dimensional alpha-concave probability measures on segments.

A needle lives on the segment ``[a, b]`` in R^n, parameterized by
``t in [0, 1]`` via ``(1 - t) a + t b``. Its density with respect to the
uniform law on the segment is proportional to ``l(t)^gamma`` with
``l(t) = c0 + c1 t`` affine and ``gamma = (1 - alpha)/alpha``; alpha = 0
uses ``exp(c0 + c1 t)`` instead. A point mass is the degenerate case.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .core import AlphaParam, as_alpha, generalized_mean
from .errors import ConstructionError, DomainError, QuadratureError

__all__ = [
    "PowerAffine",
    "LogAffine",
    "PointMass",
    "Needle",
    "make_needle",
    "point_mass_needle",
    "needle_density",
    "needle_cdf",
    "needle_quantile",
    "needle_integrate",
    "needle_sample",
    "needle_sample_t",
    "interval_mass",
    "ConcavityReport",
    "check_interval_concavity",
    "verify_needle_concavity",
    "NeedleFit",
    "fit_needle",
    "needle_to_dict",
    "needle_from_dict",
]

QUAD_ABS_TOL = 1e-9
QUAD_LIMIT = 200
# minimum of l on [0, 1] required when gamma < 0
_POSITIVE_FLOOR = 1e-12
_SERIES_BAND = 1e-5


@dataclass(frozen=True)
class PowerAffine:
    c0: float
    c1: float
    gamma: float

    kind = "power_affine"


@dataclass(frozen=True)
class LogAffine:
    c0: float
    c1: float

    kind = "log_affine"


@dataclass(frozen=True)
class PointMass:
    t0: float

    kind = "point_mass"


def _unit_mean_power(e, g):
    """Mean over [0, 1] of ``(s + (1 - s) tau)^g`` where ``s = 1 - e``.

    ``e`` is the relative drop of an affine function from its maximum to its
    minimum on the interval, so ``e`` lies in [0, 1].
    """
    e = np.asarray(e, dtype=float)
    p = g + 1.0
    out = np.empty_like(e)
    small = e < _SERIES_BAND
    es = e[small]
    out[small] = 1.0 + (p - 1.0) * (-es) / 2.0 + (p - 1.0) * (p - 2.0) * es * es / 6.0
    eb = e[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_s = np.log1p(-eb)
        if p == 0.0:
            vals = -log_s / eb
        else:
            vals = -np.expm1(p * log_s) / (p * eb)
    out[~small] = vals
    return out


def _power_mean_between(x0, x1, g):
    """Mean of ``l^g`` for ``l`` affine from ``x0`` to ``x1`` (both >= 0)."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    hi = np.maximum(x0, x1)
    lo = np.minimum(x0, x1)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(hi > 0, (hi - lo) / hi, 0.0)
        return hi**g * _unit_mean_power(e, g)


@dataclass(frozen=True)
class Needle:
    """An alpha-concave probability measure on the segment [a, b]."""

    endpoint_a: np.ndarray
    endpoint_b: np.ndarray
    alpha: AlphaParam
    profile: PowerAffine | LogAffine | PointMass
    norm_const: float = field(init=False)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.endpoint_a, dtype=float))
        b = np.atleast_1d(np.asarray(self.endpoint_b, dtype=float))
        if a.shape != b.shape or a.ndim != 1:
            raise ConstructionError("needle endpoints must be vectors of equal length")
        object.__setattr__(self, "endpoint_a", a)
        object.__setattr__(self, "endpoint_b", b)
        object.__setattr__(self, "alpha", as_alpha(self.alpha))
        prof = self.profile
        if isinstance(prof, PointMass):
            if not 0.0 <= prof.t0 <= 1.0:
                raise ConstructionError("point mass location must lie in [0, 1]")
            norm = 1.0
        elif isinstance(prof, LogAffine):
            if not self.alpha.is_zero:
                raise ConstructionError("log-affine profile requires alpha = 0")
            norm = self._log_norm(prof.c1)
        elif isinstance(prof, PowerAffine):
            expected = self.alpha.needle_exponent
            if expected is None:
                raise ConstructionError("alpha = 0 needles use the log-affine profile")
            if not math.isclose(prof.gamma, expected, rel_tol=1e-12, abs_tol=1e-12):
                raise ConstructionError(
                    f"exponent {prof.gamma} inconsistent with alpha (expected {expected})"
                )
            l0, l1 = prof.c0, prof.c0 + prof.c1
            if min(l0, l1) < 0 or max(l0, l1) <= 0:
                raise ConstructionError("affine profile must be nonnegative and not identically 0")
            if prof.gamma < 0 and min(l0, l1) <= _POSITIVE_FLOOR:
                raise ConstructionError(
                    "negative exponent requires the affine profile bounded away from 0"
                )
            norm = float(_power_mean_between(l0, l1, prof.gamma))
        else:
            raise ConstructionError(f"unknown profile {prof!r}")
        object.__setattr__(self, "norm_const", norm)

    @staticmethod
    def _log_norm(c1):
        # mean of exp(c1 (t - t_max)) over [0, 1]; t_max is where c1 t peaks
        if c1 == 0:
            return 1.0
        return float(-math.expm1(-abs(c1)) / abs(c1))

    @property
    def dim(self) -> int:
        return self.endpoint_a.shape[0]

    @property
    def is_point_mass(self) -> bool:
        return isinstance(self.profile, PointMass)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.endpoint_b - self.endpoint_a))

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.endpoint_a + t[..., None] * (self.endpoint_b - self.endpoint_a)


def make_needle(a, b, alpha, c0: float = 1.0, c1: float = 0.0) -> Needle:
    """Needle with the extreme-point profile matching ``alpha``."""
    alpha = as_alpha(alpha)
    if alpha.is_zero:
        prof = LogAffine(float(c0), float(c1))
    else:
        prof = PowerAffine(float(c0), float(c1), alpha.needle_exponent)
    return Needle(a, b, alpha, prof)


def point_mass_needle(a, b, t0: float, alpha=1.0) -> Needle:
    return Needle(a, b, as_alpha(alpha), PointMass(float(t0)))


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)) or np.any(np.isnan(t)):
        raise DomainError("needle parameter t must lie in [0, 1]")
    return t


def _scaled_levels(prof: PowerAffine):
    l0, l1 = prof.c0, prof.c0 + prof.c1
    top = max(l0, l1)
    return l0 / top, l1 / top


def needle_density(needle: Needle, t):
    """Normalized density with respect to the uniform law on the segment.

    A point mass has no density; ``inf`` is returned at the atom and 0
    elsewhere as a flag value.
    """
    scalar = np.ndim(t) == 0
    t = _check_t(t)
    prof = needle.profile
    if isinstance(prof, PointMass):
        out = np.where(t == prof.t0, np.inf, 0.0)
    elif isinstance(prof, LogAffine):
        c1 = prof.c1
        tmax = 1.0 if c1 > 0 else 0.0
        out = np.exp(c1 * (t - tmax)) / needle.norm_const
    else:
        l0, l1 = _scaled_levels(prof)
        lt = l0 + (l1 - l0) * t
        with np.errstate(divide="ignore"):
            out = lt**prof.gamma / float(_power_mean_between(l0, l1, prof.gamma))
    return float(out) if scalar else out


def needle_cdf(needle: Needle, t):
    """Distribution function of the parameter t."""
    scalar = np.ndim(t) == 0
    t = _check_t(t)
    prof = needle.profile
    if isinstance(prof, PointMass):
        out = (t >= prof.t0).astype(float)
    elif isinstance(prof, LogAffine):
        c1 = prof.c1
        if c1 == 0:
            out = t.copy()
        elif c1 > 0:
            out = np.exp(c1 * (t - 1.0)) * (-np.expm1(-c1 * t)) / (-math.expm1(-c1))
        else:
            out = np.expm1(c1 * t) / math.expm1(c1)
    else:
        l0, l1 = _scaled_levels(prof)
        lt = l0 + (l1 - l0) * t
        g = prof.gamma
        total = float(_power_mean_between(l0, l1, g))
        out = t * _power_mean_between(l0, lt, g) / total
    out = np.clip(out, 0.0, 1.0)
    return float(out) if scalar else out


def _bisect_quantile(needle, p, iters=64):
    lo = np.zeros_like(p)
    hi = np.ones_like(p)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = needle_cdf(needle, mid) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _newton_polish(needle, t, p, steps=2):
    for _ in range(steps):
        f = needle_density(needle, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (needle_cdf(needle, t) - p) / f
        t_new = t - np.where(np.isfinite(step), step, 0.0)
        t = np.where((t_new >= 0) & (t_new <= 1), t_new, t)
    return t


def needle_quantile(needle: Needle, p):
    """Inverse of :func:`needle_cdf` on the parameter t."""
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise DomainError("probability must lie in [0, 1]")
    prof = needle.profile
    if isinstance(prof, PointMass):
        out = np.full_like(p, prof.t0)
    elif isinstance(prof, LogAffine):
        c1 = prof.c1
        if c1 == 0:
            out = p.copy()
        elif c1 > 0:
            with np.errstate(divide="ignore"):
                out = 1.0 + np.log(p + (1.0 - p) * math.exp(-c1)) / c1
        else:
            out = np.log1p(p * math.expm1(c1)) / c1
        out = np.clip(out, 0.0, 1.0)
    else:
        l0, l1 = _scaled_levels(prof)
        g = prof.gamma
        q = g + 1.0
        if g == -1.0 or abs(l1 - l0) < 1e-6:
            out = _bisect_quantile(needle, p)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                lq = (l0**q + p * (l1**q - l0**q)) ** (1.0 / q)
            out = np.clip((lq - l0) / (l1 - l0), 0.0, 1.0)
            out = _newton_polish(needle, out, p)
    return float(out) if scalar else out


def interval_mass(needle: Needle, lo, hi):
    """Mass of the parameter interval [lo, hi]."""
    return needle_cdf(needle, hi) - needle_cdf(needle, lo)


def _segment_breaks(needle, u, breakpoints):
    pts = []
    if breakpoints is not None:
        pts.extend(breakpoints)
    finder = getattr(u, "segment_breakpoints", None)
    if finder is not None:
        pts.extend(finder(needle.endpoint_a, needle.endpoint_b))
    return sorted({float(p) for p in pts if 0.0 < p < 1.0})


def needle_integrate(needle: Needle, u, breakpoints=None) -> float:
    """Integral of ``u`` against the needle measure.

    ``u`` maps an ``(N, n)`` array of points to ``N`` values. Known
    discontinuities in t may be passed as ``breakpoints``; functions from
    the catalog supply them through ``segment_breakpoints``.
    """
    if needle.is_point_mass:
        x = needle.point(needle.profile.t0)
        return float(np.asarray(u(x[None, :]))[0])

    def integrand(t):
        x = needle.point(t)[None, :]
        return float(np.asarray(u(x))[0]) * needle_density(needle, t)

    cuts = [0.0, *_segment_breaks(needle, u, breakpoints), 1.0]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(
                    integrand, lo, hi, epsabs=QUAD_ABS_TOL, epsrel=1e-10, limit=QUAD_LIMIT
                )
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(
                    f"quadrature did not converge on [{lo}, {hi}]: {exc}"
                ) from exc
        total += val
    return total


def needle_sample_t(needle: Needle, count: int, seed=None) -> np.ndarray:
    if count < 1:
        raise DomainError("count must be positive")
    rng = np.random.default_rng(seed)
    return needle_quantile(needle, rng.random(count))


def needle_sample(needle: Needle, count: int, seed=None) -> np.ndarray:
    """I.i.d. points on the segment, shape ``(count, n)``."""
    return needle.point(needle_sample_t(needle, count, seed))


@dataclass
class ConcavityReport:
    max_violation: float
    worst: tuple | None
    passed: bool
    trials: int = 0
    skipped: int = 0

    def to_dict(self):
        return {
            "max_violation": self.max_violation,
            "worst": None if self.worst is None else [np.asarray(w).tolist() for w in self.worst],
            "pass": self.passed,
            "trials": self.trials,
            "skipped": self.skipped,
        }


def _random_intervals(rng, count):
    ends = np.sort(rng.random((count, 2)), axis=1)
    # half of the draws are short intervals at random centers
    short = rng.random(count) < 0.5
    centers = rng.random(count)
    half = 0.5 * 10.0 ** rng.uniform(-4, 0, count)
    lo = np.clip(centers - half, 0.0, 1.0)
    hi = np.clip(centers + half, 0.0, 1.0)
    ends[short, 0] = lo[short]
    ends[short, 1] = hi[short]
    return ends


def check_interval_concavity(cdf, alpha, trials: int, seed=None, tol: float = 1e-8):
    """Test the alpha-concavity inequality on random interval pairs in [0, 1].

    ``cdf`` is the distribution function of a probability measure on [0, 1].
    For random intervals A, B and t, the mass of ``(1-t)A + tB`` is compared
    with the alpha-mean of the masses of A and B.
    """
    rng = np.random.default_rng(seed)
    a = _random_intervals(rng, trials)
    b = _random_intervals(rng, trials)
    t = rng.random(trials)
    ma = cdf(a[:, 1]) - cdf(a[:, 0])
    mb = cdf(b[:, 1]) - cdf(b[:, 0])
    c_lo = (1 - t) * a[:, 0] + t * b[:, 0]
    c_hi = (1 - t) * a[:, 1] + t * b[:, 1]
    mc = cdf(np.clip(c_hi, 0, 1)) - cdf(np.clip(c_lo, 0, 1))
    rhs = generalized_mean(np.maximum(ma, 0.0), np.maximum(mb, 0.0), t, alpha)
    viol = rhs - mc
    i = int(np.argmax(viol))
    worst = (a[i], b[i], float(t[i]))
    max_v = float(viol[i])
    return ConcavityReport(max_v, worst, max_v <= tol, trials=trials)


def verify_needle_concavity(needle: Needle, trials: int, seed=None, tol: float = 1e-8):
    """Check the needle's measure-level alpha-concavity on random intervals."""
    if needle.is_point_mass:
        raise DomainError("point masses are not checked")
    return check_interval_concavity(
        lambda s: needle_cdf(needle, s), needle.alpha, trials, seed, tol
    )


# ---------------------------------------------------------------- fitting


@dataclass
class NeedleFit:
    needle: Needle
    ks_distance: float
    target_mean: float
    fitted_mean: float
    second_moment_residual: float
    clipped: bool = False


def _power_family_mean(phi, g):
    """Mean of t under density prop. to (1 + phi (2t - 1))^g on [0, 1]."""
    if abs(phi) < 1e-3:
        return 0.5 + g * phi / 6.0
    l0, l1 = 1.0 - phi, 1.0 + phi
    m_g = float(_power_mean_between(l0, l1, g))
    m_g1 = float(_power_mean_between(l0, l1, g + 1.0))
    return (m_g1 / m_g - l0) / (l1 - l0)


def _log_family_mean(c1):
    if abs(c1) < 1e-4:
        return 0.5 + c1 / 12.0
    if c1 > 0:
        return 1.0 / (-math.expm1(-c1)) - 1.0 / c1
    # reflection t -> 1 - t
    return 1.0 - _log_family_mean(-c1)


def _bisect_monotone(f, lo, hi, target, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def _weighted_ks(t, w, cdf_vals):
    order = np.argsort(t)
    w = w[order] / w.sum()
    cdf_vals = cdf_vals[order]
    upper = np.cumsum(w)
    lower = upper - w
    return float(max(np.max(np.abs(upper - cdf_vals)), np.max(np.abs(lower - cdf_vals))))


def fit_needle(t, alpha, weights=None, a=None, b=None, clip: bool = False) -> NeedleFit:
    """Fit an extreme-needle profile to weighted points in [0, 1].

    The profile family for a fixed exponent has one shape parameter; it is
    solved from the weighted mean by bisection on the monotone moment map.
    The weighted second moment and the Kolmogorov distance are reported as
    goodness-of-fit diagnostics.
    """
    alpha = as_alpha(alpha)
    if not (alpha.value <= 0.5 or alpha.value == 1.0):
        raise DomainError("fit_needle supports alpha <= 1/2 or alpha = 1")
    t = np.asarray(t, dtype=float).ravel()
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float).ravel()
    if t.shape != w.shape:
        raise DomainError("weights must match the points")
    if t.size < 100:
        raise DomainError("fit_needle needs at least 100 weighted points")
    if np.any((t < 0) | (t > 1)):
        raise DomainError("points must be parameters in [0, 1]")
    if np.any(w < 0) or w.sum() <= 0:
        raise DomainError("weights must be nonnegative with positive total")
    a = np.zeros(1) if a is None else a
    b = np.ones(1) if b is None else b
    target = float(np.sum(w * t) / np.sum(w))
    second = float(np.sum(w * t * t) / np.sum(w))
    clipped = False

    if alpha.value == 1.0:
        needle = make_needle(a, b, alpha, 1.0, 0.0)
    elif alpha.is_zero:
        lo_c, hi_c = -700.0, 700.0
        rng_lo, rng_hi = _log_family_mean(lo_c), _log_family_mean(hi_c)
        if not rng_lo <= target <= rng_hi:
            if not clip:
                raise ConstructionError(
                    f"profile infeasible: mean {target} outside [{rng_lo}, {rng_hi}]"
                )
            target = min(max(target, rng_lo), rng_hi)
            clipped = True
        c1 = _bisect_monotone(_log_family_mean, lo_c, hi_c, target)
        needle = make_needle(a, b, alpha, 0.0, c1)
    else:
        g = alpha.needle_exponent
        edge = 1.0 if g >= 0 else 1.0 - 1e-9
        fam = lambda phi: _power_family_mean(phi, g)  # noqa: E731
        # the moment map increases in phi for g > 0 and decreases for g < 0
        sign = 1.0 if g >= 0 else -1.0
        m_lo, m_hi = sorted((fam(-edge), fam(edge)))
        if not m_lo <= target <= m_hi:
            if not clip:
                raise ConstructionError(
                    f"profile infeasible: mean {target} outside [{m_lo}, {m_hi}]"
                )
            target = min(max(target, m_lo), m_hi)
            clipped = True
        phi = sign * _bisect_monotone(lambda s: fam(sign * s), -edge, edge, target)
        needle = make_needle(a, b, alpha, 1.0 - phi, 2.0 * phi)

    cdf_vals = needle_cdf(needle, t)
    ks = _weighted_ks(t, w, cdf_vals)
    fitted_mean = 1.0 - float(
        integrate.quad(lambda s: needle_cdf(needle, s), 0.0, 1.0, limit=200)[0]
    )
    fitted_second = 1.0 - 2.0 * float(
        integrate.quad(lambda s: s * needle_cdf(needle, s), 0.0, 1.0, limit=200)[0]
    )
    return NeedleFit(needle, ks, target, fitted_mean, second - fitted_second, clipped)


# ------------------------------------------------------------- serialization


def needle_to_dict(needle: Needle) -> dict:
    prof = needle.profile
    if isinstance(prof, PointMass):
        pd = {"kind": prof.kind, "t0": prof.t0}
    elif isinstance(prof, LogAffine):
        pd = {"kind": prof.kind, "c0": prof.c0, "c1": prof.c1}
    else:
        pd = {"kind": prof.kind, "c0": prof.c0, "c1": prof.c1, "gamma": prof.gamma}
    return {
        "a": needle.endpoint_a.tolist(),
        "b": needle.endpoint_b.tolist(),
        "alpha": needle.alpha.to_json(),
        "profile": pd,
    }


def needle_from_dict(data: dict) -> Needle:
    alpha = as_alpha(data["alpha"])
    pd = data["profile"]
    kind = pd["kind"]
    if kind == "point_mass":
        prof = PointMass(float(pd["t0"]))
    elif kind == "log_affine":
        prof = LogAffine(float(pd["c0"]), float(pd["c1"]))
    elif kind == "power_affine":
        gamma = pd.get("gamma", alpha.needle_exponent)
        prof = PowerAffine(float(pd["c0"]), float(pd["c1"]), float(gamma))
    else:
        raise ConstructionError(f"unknown needle profile kind {kind!r}")
    return Needle(data["a"], data["b"], alpha, prof)
