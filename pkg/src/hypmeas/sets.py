"""Set oracles with exact measure along segments.

Every oracle answers two questions: membership of points, and the
uniform measure ``m_[x,y](S) = mes{t in (0, 1) : (1-t) x + t y in S}`` of
the set along a segment. The segment measure is exact for polytopes,
interval unions and gauge bodies, and grid-based for generic predicates.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import ConstructionError, DomainError

__all__ = [
    "SetOracle",
    "Polytope",
    "SymmetricConvexGauge",
    "EuclideanGauge",
    "Interval",
    "IntervalUnion",
    "Complement",
    "Union",
    "Generic",
    "interval_polytope",
    "box_polytope",
    "set_from_dict",
    "set_from_string",
]

_MEMBERSHIP_TOL = 1e-12


def _pairs(x, y, dim):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x = x.reshape(-1, dim) if x.ndim <= 1 else x
    y = y.reshape(-1, dim) if y.ndim <= 1 else y
    x, y = np.broadcast_arrays(x, y)
    return x, y


class SetOracle:
    """Base class. Subclasses implement ``contains`` and ``_segment_measure``."""

    dim: int
    ambient: "Polytope | None" = None

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def _segment_measure(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def with_ambient(self, ambient: "Polytope"):
        self.ambient = ambient
        return self

    def line_measure_many(self, x, y, check_ambient: bool = False) -> np.ndarray:
        """Segment measures for row-aligned arrays of endpoints.

        Degenerate segments (x == y) get the Dirac convention: the indicator
        of x in the set.
        """
        x, y = _pairs(x, y, self.dim)
        if check_ambient and self.ambient is not None:
            if not (np.all(self.ambient.contains(x)) and np.all(self.ambient.contains(y))):
                raise DomainError("segment endpoints must lie in the ambient set F")
        out = np.clip(self._segment_measure(x, y), 0.0, 1.0)
        same = np.all(x == y, axis=1)
        if np.any(same):
            out = np.where(same, self.contains(x).astype(float), out)
        return out

    def line_measure(self, x, y) -> float:
        return float(self.line_measure_many(x, y, check_ambient=True)[0])


# ---------------------------------------------------------------- polytopes


class Polytope(SetOracle):
    """``{x : A x <= c}``; an empty row list is the whole space."""

    def __init__(self, A, c, dim: int | None = None):
        A = np.asarray(A, dtype=float)
        c = np.asarray(c, dtype=float).ravel()
        if A.size == 0:
            if dim is None:
                raise ConstructionError("dimension required for a polytope without rows")
            A = np.zeros((0, dim))
        A = np.atleast_2d(A)
        if A.shape[0] != c.shape[0]:
            raise ConstructionError("halfspace rows and offsets differ in length")
        self.A = A
        self.c = c
        self.dim = A.shape[1]
        self.ambient = None
        self.interior_point, self.inradius = self._chebyshev_center()
        if self.inradius <= 1e-12:
            raise ConstructionError("polytope is empty or has no interior")

    @classmethod
    def from_rows(cls, rows):
        rows = np.asarray(rows, dtype=float)
        return cls(rows[:, :-1], rows[:, -1])

    def _chebyshev_center(self):
        n = self.dim
        if self.A.shape[0] == 0:
            return np.zeros(n), np.inf
        norms = np.linalg.norm(self.A, axis=1)
        # maximize r subject to a_i x + r |a_i| <= c_i, with a cap so unbounded sets work
        cost = np.zeros(n + 1)
        cost[-1] = -1.0
        A_ub = np.hstack([self.A, norms[:, None]])
        bounds = [(-1e6, 1e6)] * n + [(0, 1.0)]
        res = linprog(cost, A_ub=A_ub, b_ub=self.c, bounds=bounds, method="highs")
        if res.status != 0:
            return np.zeros(n), 0.0
        return res.x[:n], float(res.x[-1])

    def contains(self, points, tol: float = _MEMBERSHIP_TOL):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.A.shape[0] == 0:
            return np.ones(p.shape[0], dtype=bool)
        return np.all(p @ self.A.T <= self.c + tol, axis=1)

    def segment_interval(self, x, y):
        """Parameter range ``[lo, hi]`` of the segment inside the polytope."""
        x, y = _pairs(x, y, self.dim)
        d = y - x
        lo = np.zeros(x.shape[0])
        hi = np.ones(x.shape[0])
        if self.A.shape[0] == 0:
            return lo, hi
        wx = x @ self.A.T
        wd = d @ self.A.T
        # same slack as contains(), so boundary-riding segments count as inside
        slack = self.c + _MEMBERSHIP_TOL - wx
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = slack / wd
        pos = wd > 0
        neg = wd < 0
        hi = np.minimum(hi, np.min(np.where(pos, ratio, np.inf), axis=1))
        lo = np.maximum(lo, np.max(np.where(neg, ratio, -np.inf), axis=1))
        blocked = np.any((wd == 0) & (slack < 0), axis=1)
        hi = np.where(blocked, lo, hi)
        return lo, np.maximum(hi, lo)

    def _segment_measure(self, x, y):
        lo, hi = self.segment_interval(x, y)
        return hi - lo

    def bounding_box(self):
        n = self.dim
        lo = np.empty(n)
        hi = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            for sign, store in ((1.0, lo), (-1.0, hi)):
                res = linprog(sign * e, A_ub=self.A, b_ub=self.c, bounds=[(None, None)] * n,
                              method="highs")
                if res.status != 0:
                    raise ConstructionError("polytope is unbounded")
                store[i] = res.x[i]
        return lo, hi

    def intersect(self, other: "Polytope") -> "Polytope":
        return Polytope(np.vstack([self.A, other.A]), np.concatenate([self.c, other.c]),
                        dim=self.dim)

    def add_halfspace(self, w, c) -> "Polytope":
        w = np.asarray(w, dtype=float).reshape(1, -1)
        return Polytope(np.vstack([self.A, w]), np.append(self.c, c), dim=self.dim)

    def to_dict(self):
        return {"polytope": np.hstack([self.A, self.c[:, None]]).tolist()}


def interval_polytope(lo: float, hi: float) -> Polytope:
    return Polytope([[1.0], [-1.0]], [hi, -lo])


def box_polytope(lo, hi) -> Polytope:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    eye = np.eye(n)
    return Polytope(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))


# ------------------------------------------------------------------- gauges


class SymmetricConvexGauge(SetOracle):
    """The open body ``{x : gauge(x - center) < 1}`` of a symmetric gauge.

    The gauge is convex along every line, so the part of a segment inside
    the body is one interval, located by golden-section search for the
    minimum followed by bisection on both sides.
    """

    def __init__(self, gauge, dim: int, center=None, check: bool = True, seed: int = 0):
        self.gauge = gauge
        self.dim = int(dim)
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, float)
        self.ambient = None
        if check:
            self._check_homogeneous(seed)

    def _check_homogeneous(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((16, self.dim))
        s = rng.uniform(0.1, 10.0, 16)
        lhs = self.gauge(s[:, None] * x)
        rhs = s * self.gauge(x)
        if not np.allclose(lhs, rhs, rtol=1e-10, atol=0.0):
            raise ConstructionError("gauge is not positively homogeneous")

    def value(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return self.gauge(p - self.center)

    def contains(self, points):
        return self.value(points) < 1.0

    def scaled(self, factor: float) -> "SymmetricConvexGauge":
        """The body ``factor * B`` (about the center)."""
        g = self.gauge
        return SymmetricConvexGauge(lambda x: g(x) / factor, self.dim, self.center, check=False)

    def _t_interval(self, x, y):
        gx = lambda s: self.value(x + s[:, None] * (y - x))  # noqa: E731
        n = x.shape[0]
        a = np.zeros(n)
        b = np.ones(n)
        ratio = (np.sqrt(5.0) - 1.0) / 2.0
        c = b - ratio * (b - a)
        d = a + ratio * (b - a)
        fc, fd = gx(c), gx(d)
        for _ in range(80):
            left = fc < fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            c = b - ratio * (b - a)
            d = a + ratio * (b - a)
            fc, fd = gx(c), gx(d)
        smin = 0.5 * (a + b)
        inside = gx(smin) < 1.0
        # left crossing on [0, smin], right crossing on [smin, 1]
        lo = self._bisect_crossing(gx, np.zeros(n), smin, decreasing=True)
        hi = self._bisect_crossing(gx, smin, np.ones(n), decreasing=False)
        lo = np.where(inside, lo, 0.0)
        hi = np.where(inside, hi, 0.0)
        return lo, hi

    @staticmethod
    def _bisect_crossing(gx, a, b, decreasing, iters=60):
        # find s where gx crosses 1 on [a, b]; if it never does, return the far end
        fa = gx(a)
        fb = gx(b)
        if decreasing:
            no_cross = fa < 1.0
            lo, hi = a.copy(), b.copy()
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                outside = gx(mid) >= 1.0
                lo = np.where(outside, mid, lo)
                hi = np.where(outside, hi, mid)
            return np.where(no_cross, a, hi)
        no_cross = fb < 1.0
        lo, hi = a.copy(), b.copy()
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            inside = gx(mid) < 1.0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return np.where(no_cross, b, lo)

    def _segment_measure(self, x, y):
        lo, hi = self._t_interval(x, y)
        return np.maximum(hi - lo, 0.0)

    def to_dict(self):
        raise NotImplementedError("generic gauges have no JSON form")


class EuclideanGauge(SymmetricConvexGauge):
    """Open Euclidean ball of a given radius; segment measure in closed form."""

    def __init__(self, radius: float = 1.0, dim: int = 2, center=None):
        if radius <= 0:
            raise ConstructionError("radius must be positive")
        self.radius = float(radius)
        r = self.radius
        super().__init__(lambda x: np.linalg.norm(x, axis=-1) / r, dim, center, check=False)

    def scaled(self, factor: float) -> "EuclideanGauge":
        return EuclideanGauge(self.radius * factor, self.dim, self.center)

    def _t_interval(self, x, y):
        p = x - self.center
        d = y - x
        qa = np.einsum("ij,ij->i", d, d)
        qb = 2.0 * np.einsum("ij,ij->i", p, d)
        qc = np.einsum("ij,ij->i", p, p) - self.radius**2
        disc = qb * qb - 4.0 * qa * qc
        ok = (disc > 0) & (qa > 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            # numerically stable roots
            q = -0.5 * (qb + np.copysign(sq, qb))
            r1 = np.where(ok, q / qa, 0.0)
            r2 = np.where(ok & (q != 0), qc / q, 0.0)
        lo = np.clip(np.minimum(r1, r2), 0.0, 1.0)
        hi = np.clip(np.maximum(r1, r2), 0.0, 1.0)
        lo = np.where(ok, lo, 0.0)
        hi = np.where(ok, hi, 0.0)
        return lo, hi

    def to_dict(self):
        d = {"gauge": "euclidean", "radius": self.radius, "dim": self.dim}
        if np.any(self.center != 0):
            d["center"] = self.center.tolist()
        return d


# ----------------------------------------------------------- interval unions


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.hi < self.lo:
            raise ConstructionError(f"interval bounds reversed: {self.lo} > {self.hi}")
        if self.hi == self.lo and not (self.lo_closed and self.hi_closed):
            raise ConstructionError("a degenerate interval must be closed")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        left = (x > self.lo) | (self.lo_closed & (x == self.lo))
        right = (x < self.hi) | (self.hi_closed & (x == self.hi))
        return left & right

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "lo_closed": self.lo_closed,
                "hi_closed": self.hi_closed}


def _normalize(intervals):
    ivs = sorted(intervals, key=lambda iv: (iv.lo, not iv.lo_closed))
    out: list[Interval] = []
    for iv in ivs:
        if out:
            prev = out[-1]
            touches = iv.lo < prev.hi or (
                iv.lo == prev.hi and (prev.hi_closed or iv.lo_closed)
            )
            if touches:
                if iv.hi > prev.hi or (iv.hi == prev.hi and iv.hi_closed):
                    hi, hic = iv.hi, iv.hi_closed or (iv.hi == prev.hi and prev.hi_closed)
                else:
                    hi, hic = prev.hi, prev.hi_closed
                out[-1] = Interval(prev.lo, hi, prev.lo_closed, hic)
                continue
        out.append(iv)
    return out


class IntervalUnion(SetOracle):
    """Finite union of intervals on the line with open/closed endpoint flags."""

    dim = 1

    def __init__(self, intervals=(), ambient=None):
        ivs = []
        for iv in intervals:
            if isinstance(iv, Interval):
                ivs.append(iv)
            elif len(iv) == 2:
                ivs.append(Interval(float(iv[0]), float(iv[1])))
            else:
                ivs.append(Interval(float(iv[0]), float(iv[1]), bool(iv[2]), bool(iv[3])))
        self.intervals: list[Interval] = _normalize(ivs)
        self.ambient = ambient

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __repr__(self):
        parts = []
        for iv in self.intervals:
            parts.append(f"{'[' if iv.lo_closed else '('}{iv.lo:.12g}, {iv.hi:.12g}"
                         f"{']' if iv.hi_closed else ')'}")
        return "IntervalUnion(" + " u ".join(parts) + ")"

    @property
    def measure(self) -> float:
        return float(sum(iv.length for iv in self.intervals))

    def contains(self, points):
        x = np.asarray(points, dtype=float).reshape(-1)
        out = np.zeros(x.shape[0], dtype=bool)
        for iv in self.intervals:
            out |= iv.contains(x)
        return out

    def _segment_measure(self, x, y):
        xs = x[:, 0]
        d = y[:, 0] - xs
        total = np.zeros(xs.shape[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            for iv in self.intervals:
                s1 = (iv.lo - xs) / d
                s2 = (iv.hi - xs) / d
                lo = np.clip(np.minimum(s1, s2), 0.0, 1.0)
                hi = np.clip(np.maximum(s1, s2), 0.0, 1.0)
                total += np.where(d != 0, hi - lo, 0.0)
        return total

    def complement(self, f_lo: float, f_hi: float) -> "IntervalUnion":
        """``F \\ self`` for the closed interval F = [f_lo, f_hi]."""
        out = []
        cur, cur_closed = f_lo, True
        for iv in self.intervals:
            if iv.lo > cur or (iv.lo == cur and cur_closed and not iv.lo_closed):
                out.append(Interval(cur, iv.lo, cur_closed, not iv.lo_closed))
            cur, cur_closed = iv.hi, not iv.hi_closed
        if f_hi > cur or (f_hi == cur and cur_closed):
            out.append(Interval(cur, f_hi, cur_closed, True))
        return IntervalUnion(out, ambient=self.ambient)

    def is_close(self, other: "IntervalUnion", tol: float = 1e-10) -> bool:
        """Endpoints within ``tol`` and identical open/closed flags."""
        if len(self) != len(other):
            return False
        for p, q in zip(self.intervals, other.intervals):
            if abs(p.lo - q.lo) > tol or abs(p.hi - q.hi) > tol:
                return False
            if p.lo_closed != q.lo_closed or p.hi_closed != q.hi_closed:
                return False
        return True

    def to_dict(self):
        return {"intervals": [iv.to_dict() for iv in self.intervals]}


# ------------------------------------------------------------- combinators


class Complement(SetOracle):
    def __init__(self, inner: SetOracle, ambient=None):
        self.inner = inner
        self.dim = inner.dim
        self.ambient = ambient

    def contains(self, points):
        return ~self.inner.contains(points)

    def _segment_measure(self, x, y):
        return 1.0 - self.inner._segment_measure(x, y)

    def to_dict(self):
        return {"complement": self.inner.to_dict()}


class Union(SetOracle):
    """Union of pairwise disjoint sets (measures add)."""

    def __init__(self, parts, ambient=None):
        parts = list(parts)
        if not parts:
            raise ConstructionError("union needs at least one part")
        self.parts = parts
        self.dim = parts[0].dim
        self.ambient = ambient

    def contains(self, points):
        out = self.parts[0].contains(points)
        for p in self.parts[1:]:
            out = out | p.contains(points)
        return out

    def _segment_measure(self, x, y):
        return sum(p._segment_measure(x, y) for p in self.parts)


class Generic(SetOracle):
    """Membership predicate only; segment measure from a midpoint grid with
    one Richardson step (``2 M_2n - M_n``)."""

    def __init__(self, predicate, dim: int, grid: int = 10_000, ambient=None):
        self.predicate = predicate
        self.dim = int(dim)
        self.grid = int(grid)
        self.ambient = ambient

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.predicate(p), dtype=bool)

    def _grid_mean(self, x, y, n):
        s = (np.arange(n) + 0.5) / n
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            pts = x[i] + s[:, None] * (y[i] - x[i])
            out[i] = np.mean(self.contains(pts))
        return out

    def _segment_measure(self, x, y):
        coarse = self._grid_mean(x, y, self.grid // 2)
        fine = self._grid_mean(x, y, self.grid)
        return np.clip(2.0 * fine - coarse, 0.0, 1.0)


# ------------------------------------------------------------ descriptors


def set_from_dict(d: dict, dim: int | None = None) -> SetOracle:
    """Parse ``{"intervals": ...}``, ``{"polytope": ...}``, ``{"gauge": ...}``
    or ``{"complement": ...}``."""
    if "intervals" in d:
        ivs = []
        for item in d["intervals"]:
            if isinstance(item, dict):
                ivs.append(Interval(float(item["lo"]), float(item["hi"]),
                                    bool(item.get("lo_closed", True)),
                                    bool(item.get("hi_closed", True))))
            else:
                ivs.append(item)
        return IntervalUnion(ivs)
    if "polytope" in d:
        return Polytope.from_rows(d["polytope"])
    if "gauge" in d:
        if d["gauge"] != "euclidean":
            raise ConstructionError(f"unknown gauge {d['gauge']!r}")
        return EuclideanGauge(float(d.get("radius", 1.0)), int(d.get("dim", dim or 2)),
                              d.get("center"))
    if "complement" in d:
        return Complement(set_from_dict(d["complement"], dim))
    raise ConstructionError(f"unrecognized set descriptor: {d!r}")


def set_from_string(text: str, dim: int | None = None) -> SetOracle:
    """Accept raw JSON or the ``kind:payload`` shorthand, e.g.
    ``intervals:[[0,0.1]]`` or ``ball:1`` (complement via ``not-ball:1``)."""
    text = text.strip()
    if text.startswith("{"):
        return set_from_dict(json.loads(text), dim)
    kind, _, payload = text.partition(":")
    if kind == "intervals":
        return set_from_dict({"intervals": json.loads(payload)}, dim)
    if kind == "polytope":
        return set_from_dict({"polytope": json.loads(payload)}, dim)
    if kind == "ball":
        return EuclideanGauge(float(payload or 1.0), dim or 2)
    if kind == "not-ball":
        return Complement(EuclideanGauge(float(payload or 1.0), dim or 2))
    raise ConstructionError(f"unrecognized set descriptor {text!r}")
