"""Rate functions, dilation bounds and deviation inequalities.

The rate function is the sharp lower bound for the measure of a dilation
``B^delta`` of a set of measure p under an alpha-concave law:

    R(p) = 1 - [((1 - p)^alpha - (1 - delta)) / delta]^(1/alpha)

with the limit ``1 - (1 - p)^(1/delta)`` at alpha = 0. The modulus of
regularity ``delta_u(eps)`` of a function u measures how much of a segment
[x, y] can see ``|u|`` drop below ``eps |u(x)|``; plugging it into the
dilation bound gives large and small deviation inequalities for u.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import AlphaParam, as_alpha
from .errors import BudgetError, DomainError

__all__ = [
    "RateParams",
    "rate_function",
    "rate_function_complement",
    "dilation_lower_bound",
    "deviation_inequality_rhs",
    "modulus_seminorm",
    "ModulusEstimate",
    "segment_sublevel_measure",
    "estimate_modulus",
    "large_deviation_bound",
    "large_deviation_constant",
    "LargeDeviationBound",
    "small_deviation_constant",
    "small_deviation_bound",
    "norm_tail_relation",
    "norm_tail_bound",
    "NormTailBound",
    "small_ball_constant",
    "small_ball_bound",
]

# |alpha| below this switches to the alpha = 0 limits
_ZERO_BAND = 1e-12


def _finite_alpha(alpha) -> float:
    a = as_alpha(alpha)
    if a.is_neg_inf:
        raise DomainError("alpha must be finite here")
    return a.value


def _unit(name, x, lo_open=False, hi_open=False):
    x = float(x)
    lo_ok = x > 0 if lo_open else x >= 0
    hi_ok = x < 1 if hi_open else x <= 1
    if not (lo_ok and hi_ok) or math.isnan(x):
        raise DomainError(f"{name}={x} outside its range")
    return x


@dataclass(frozen=True)
class RateParams:
    alpha: AlphaParam
    delta: float
    p: float

    def __post_init__(self):
        a = as_alpha(self.alpha)
        if a.is_neg_inf:
            raise DomainError("alpha = -inf is not allowed for the rate function")
        object.__setattr__(self, "alpha", a)
        _unit("delta", self.delta)
        _unit("p", self.p)

    def value(self) -> float:
        return rate_function(self.alpha, self.delta, self.p)


def rate_function(alpha, delta: float, p: float) -> float:
    """``R_delta^(alpha)(p)``, the lower bound for ``mu(B^delta)`` given ``mu(B) = p``."""
    a = _finite_alpha(alpha)
    delta = _unit("delta", delta)
    p = _unit("p", p)
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if delta == 0.0:
        return 1.0
    if delta == 1.0:
        return p
    q = 1.0 - p
    if abs(a) < _ZERO_BAND:
        # 1 - q^(1/delta), computed without cancellation
        return float(-math.expm1(math.log(q) / delta))
    if a > 0:
        # the bracket vanishes once (1-p)^alpha <= 1 - delta
        if math.log(q) * a <= math.log1p(-delta):
            return 1.0
    # (q^a - (1 - delta)) / delta = 1 + (q^a - 1) / delta
    shift = math.expm1(a * math.log(q)) / delta
    if shift <= -1.0:
        return 1.0
    return float(min(max(-math.expm1(math.log1p(shift) / a), 0.0), 1.0))


def rate_function_complement(alpha, delta: float, p: float) -> float:
    """``1 - R_delta^(alpha)(p)`` without cancellation when R is close to 1."""
    a = _finite_alpha(alpha)
    delta = _unit("delta", delta)
    p = _unit("p", p)
    if p == 0.0:
        return 1.0
    if p == 1.0 or delta == 0.0:
        return 0.0
    if delta == 1.0:
        return 1.0 - p
    q = 1.0 - p
    if abs(a) < _ZERO_BAND:
        return float(math.exp(math.log(q) / delta))
    shift = math.expm1(a * math.log(q)) / delta
    if shift <= -1.0:
        return 0.0
    return float(min(max(math.exp(math.log1p(shift) / a), 0.0), 1.0))


def dilation_lower_bound(alpha, delta: float, q: float) -> float:
    """``[delta q^alpha + (1 - delta)]^(1/alpha)``, or ``q^delta`` at alpha = 0."""
    a = _finite_alpha(alpha)
    delta = _unit("delta", delta)
    q = float(q)
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q={q} must lie in (0, 1]")
    if delta == 1.0:
        return q
    if abs(a) < _ZERO_BAND:
        return float(q**delta)
    return float(math.exp(math.log1p(delta * math.expm1(a * math.log(q))) / a))


def deviation_inequality_rhs(alpha, delta: float, q: float) -> float:
    """Lower bound on ``mu{|u| > lambda eps}`` from ``q = mu{|u| > lambda}``."""
    return dilation_lower_bound(alpha, delta, q)


def modulus_seminorm(epsilon: float) -> float:
    """Modulus of regularity of any seminorm: ``2 eps / (1 + eps)``."""
    eps = _unit("epsilon", epsilon, lo_open=True)
    return 2.0 * eps / (1.0 + eps)


# ------------------------------------------------------------ brute force


@dataclass
class ModulusEstimate:
    epsilon: float
    value: float
    method: str
    witnesses: tuple | None = None
    antipodal_value: float | None = None
    pairs: int = 0
    skipped: int = 0
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        w = None
        if self.witnesses is not None:
            w = {"x": np.asarray(self.witnesses[0]).tolist(),
                 "y": np.asarray(self.witnesses[1]).tolist()}
        return {"epsilon": self.epsilon, "value": self.value, "method": self.method,
                "witnesses": w, "antipodal_value": self.antipodal_value,
                "pairs": self.pairs, "skipped": self.skipped, **self.metadata}


def _crossing(fn, x, y, lo, hi, below_lo, iters=60):
    """Bisect for the boundary of ``{t : fn(t) <= 0}`` between lo and hi."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = fn(mid) <= 0
        if below == below_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def segment_sublevel_measure(u, x, y, epsilon: float, grid: int = 512) -> float:
    """``mes{t in (0,1) : |u((1-t)x + ty)| <= eps |u(x)|}``.

    The sublevel set is assembled from sign changes on a uniform grid,
    each refined by bisection; ``|u|`` need not be monotone.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    level = epsilon * abs(float(np.asarray(u(x[None, :]))[0]))
    t = np.linspace(0.0, 1.0, grid + 1)
    pts = (1.0 - t)[:, None] * x + t[:, None] * y
    h = np.abs(np.asarray(u(pts), dtype=float)) - level
    below = h <= 0

    def fn(s):
        p = (1.0 - s) * x + s * y
        return abs(float(np.asarray(u(p[None, :]))[0])) - level

    total = 0.0
    start = 0.0 if below[0] else None
    for i in range(grid):
        if below[i] == below[i + 1]:
            continue
        c = _crossing(fn, x, y, t[i], t[i + 1], below[i])
        if below[i]:
            total += c - start
            start = None
        else:
            start = c
    if start is not None:
        total += 1.0 - start
    return float(min(max(total, 0.0), 1.0))


def estimate_modulus(u, domain_sampler, epsilon: float, pairs: int = 2000, seed=0,
                     grid: int = 512, scales: int = 33, workers: int | None = None
                     ) -> ModulusEstimate:
    """Brute-force ``delta_u(eps)`` over random and structured pairs.

    ``domain_sampler(count, rng)`` draws points. Besides random pairs, each x
    is paired with ``y = -x`` and with ``y = -c x`` for ``scales`` values of c
    in (0, 1); the best c is then refined by golden-section search. Pairs
    with ``u(x)`` zero or infinite are skipped.
    """
    eps = _unit("epsilon", epsilon, lo_open=True)
    if pairs < 1:
        raise BudgetError("at least one pair is required")
    rng = np.random.default_rng(seed)
    X = np.asarray(domain_sampler(pairs, rng), dtype=float)
    Y = np.asarray(domain_sampler(pairs, rng), dtype=float)
    if X.ndim == 1:
        X, Y = X[:, None], Y[:, None]
    ux = np.asarray(u(X), dtype=float)
    ok = np.isfinite(ux) & (ux != 0)
    if not ok.any():
        raise BudgetError("all pairs skipped")
    X, Y = X[ok], Y[ok]
    m = X.shape[0]

    def run(pair):
        return segment_sublevel_measure(u, pair[0], pair[1], eps, grid)

    def evaluate(cands):
        if workers and workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                return np.array(list(ex.map(run, cands)))
        return np.array([run(c) for c in cands])

    random_vals = evaluate([(X[i], Y[i]) for i in range(m)])
    anti_vals = evaluate([(X[i], -X[i]) for i in range(m)])
    # for homogeneous u the scaled family does not depend on x
    base = X[: min(m, 8)]
    cs = (np.arange(scales) + 0.5) / scales
    scaled = evaluate([(x, -c * x) for x in base for c in cs]).reshape(base.shape[0], scales)
    bi, bj = np.unravel_index(int(np.argmax(scaled)), scaled.shape)
    x0 = base[bi]
    a = cs[bj - 1] if bj > 0 else 0.0
    b = cs[bj + 1] if bj < scales - 1 else 1.0
    gr = (math.sqrt(5) - 1) / 2
    f = lambda c: run((x0, -c * x0))  # noqa: E731
    c1, c2 = b - gr * (b - a), a + gr * (b - a)
    f1, f2 = f(c1), f(c2)
    for _ in range(60):
        if f1 >= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - gr * (b - a)
            f1 = f(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + gr * (b - a)
            f2 = f(c2)
    c_best = c1 if f1 >= f2 else c2
    refined = max(f1, f2)

    ir, ia = int(np.argmax(random_vals)), int(np.argmax(anti_vals))
    options = [
        (float(random_vals[ir]), (X[ir], Y[ir]), "random"),
        (float(anti_vals[ia]), (X[ia], -X[ia]), "antipodal"),
        (float(scaled.max()), (x0, -cs[bj] * x0), "scaled"),
        (float(refined), (x0, -c_best * x0), "scaled"),
    ]
    value, wit, kind = max(options, key=lambda o: o[0])
    return ModulusEstimate(
        eps, value, "brute_force", wit, float(anti_vals.max()),
        pairs=2 * m + scaled.size + 122, skipped=int(pairs - ok.sum()),
        metadata={"best_family": kind, "best_scale": float(c_best),
                  "random_max": float(random_vals.max())},
    )


# ------------------------------------------------------- deviation bounds


@dataclass(frozen=True)
class LargeDeviationBound:
    value: float
    simplified: float | None
    constant: float | None

    def to_dict(self):
        return {"value": self.value, "simplified": self.simplified, "constant": self.constant}


def large_deviation_constant(alpha) -> float:
    """``(2^-alpha - 1)^(1/alpha)`` for alpha < 0; tends to 1/2 as alpha -> -inf."""
    a = as_alpha(alpha)
    if a.is_neg_inf:
        return 0.5
    x = a.value
    if x >= 0:
        raise DomainError("the simplified constant is defined for alpha < 0")
    return float(math.exp(math.log(math.expm1(-x * math.log(2.0))) / x))


def large_deviation_bound(alpha, modulus: float, r: float | None = None) -> LargeDeviationBound:
    """Upper bound on ``mu{|u| >= m r}`` from ``delta = delta_u(1/r)``.

    ``[1 + (2^-alpha - 1)/delta]^(1/alpha)``, or ``2^(-1/delta)`` at alpha = 0.
    For alpha < 0 the looser ``C_alpha delta^(-1/alpha)`` is reported too.
    """
    a = _finite_alpha(alpha)
    d = _unit("modulus", modulus, lo_open=True)
    if r is not None and not r > 1:
        raise DomainError("r must exceed 1")
    if abs(a) < _ZERO_BAND:
        return LargeDeviationBound(float(2.0 ** (-1.0 / d)), None, None)
    value = float(math.exp(math.log1p(math.expm1(-a * math.log(2.0)) / d) / a))
    if a < 0:
        C = large_deviation_constant(a)
        return LargeDeviationBound(value, float(C * d ** (-1.0 / a)), C)
    return LargeDeviationBound(value, None, None)


def small_deviation_constant(alpha) -> float:
    """``(2^-alpha - 1)/(-alpha)``, with ``log 2`` at alpha = 0."""
    a = _finite_alpha(alpha)
    if abs(a) < _ZERO_BAND:
        return math.log(2.0)
    return float(math.expm1(-a * math.log(2.0)) / (-a))


def small_deviation_bound(alpha, modulus: float) -> float:
    """Upper bound ``C_alpha delta_u(eps)`` on ``mu{|u| <= m eps}``."""
    d = _unit("modulus", modulus)
    return small_deviation_constant(alpha) * d


def norm_tail_relation(alpha, mu_B: float, mu_rB: float, r: float) -> tuple[float, float]:
    """Both sides of the implicit relation between ``mu(B)`` and ``mu(rB)``.

    Returns ``(lhs, rhs)`` with ``lhs = 1 - mu(B)`` and ``rhs`` the generalized
    mean of ``1 - mu(rB)`` and 1 with weights ``2/(r+1)`` and ``(r-1)/(r+1)``;
    the inequality ``lhs >= rhs`` holds for alpha-concave measures.
    """
    a = _finite_alpha(alpha)
    if not r > 1:
        raise DomainError("r must exceed 1")
    w = 2.0 / (r + 1.0)
    tail = 1.0 - _unit("mu_rB", mu_rB)
    lhs = 1.0 - _unit("mu_B", mu_B)
    if tail == 0.0:
        rhs = 0.0 if a <= 0 else (1.0 - w) ** (1.0 / a)
    elif abs(a) < _ZERO_BAND:
        rhs = tail**w
    else:
        rhs = (w * tail**a + (1.0 - w)) ** (1.0 / a)
    return float(lhs), float(rhs)


@dataclass(frozen=True)
class NormTailBound:
    solved_tail_bound: float
    alpha: float
    mu_B: float
    r: float

    def implicit_lhs_bound(self, mu_rB: float) -> tuple[float, float]:
        return norm_tail_relation(self.alpha, self.mu_B, mu_rB, self.r)

    def to_dict(self):
        return {"solved_tail_bound": self.solved_tail_bound, "alpha": self.alpha,
                "mu_B": self.mu_B, "r": self.r}


def norm_tail_bound(alpha, mu_B: float, r: float) -> NormTailBound:
    """Upper bound on ``1 - mu(rB)`` for a symmetric convex B."""
    a = _finite_alpha(alpha)
    mu_B = _unit("mu_B", mu_B)
    if not r > 1:
        raise DomainError("r must exceed 1")
    q = 1.0 - mu_B
    k = 0.5 * (r + 1.0)
    if q == 0.0:
        value = 0.0
    elif abs(a) < _ZERO_BAND:
        value = q**k
    else:
        inner = k * q**a - (k - 1.0)
        if a > 0:
            value = max(inner, 0.0) ** (1.0 / a)
        else:
            value = inner ** (1.0 / a)
    return NormTailBound(float(min(value, 1.0)), a, mu_B, float(r))


def small_ball_constant(alpha) -> float:
    """``2 (2^-alpha - 1)/(-alpha)``, with ``2 log 2`` at alpha = 0."""
    return 2.0 * small_deviation_constant(alpha)


def small_ball_bound(alpha, epsilon: float) -> float:
    """``C_alpha eps``; valid when the unit ball has measure at most 1/2."""
    eps = _unit("epsilon", epsilon)
    return small_ball_constant(alpha) * eps
