"""Dilations ``B^delta`` and contractions ``A_delta`` of sets.

``B^delta`` collects every point x of F for which some segment [x, y] in F
spends more than a delta-fraction of its length in B; ``A_delta`` keeps the
points of A for which every segment through them spends at least a
``(1 - delta)``-fraction in A. On the line both are computed exactly with
open/closed endpoint bookkeeping; for complements of symmetric convex
bodies the contraction is a scaled body; elsewhere ``mu(B^delta)`` is
estimated by Monte Carlo with a witness search.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, DomainError
from .sets import (
    EuclideanGauge,
    Interval,
    IntervalUnion,
    Polytope,
    SetOracle,
    SymmetricConvexGauge,
    box_polytope,
)

__all__ = [
    "DilationResult",
    "line_measure",
    "dilate_intervals_1d",
    "contract_intervals_1d",
    "dilate_symmetric_complement",
    "witness_scores",
    "estimate_dilated_measure",
]

_CHUNK = 4096


@dataclass
class DilationResult:
    """Outcome of a dilation computation.

    ``kind`` is ``"exact_interval_union"``, ``"exact_gauge_scaled"`` or
    ``"monte_carlo"``; only the matching fields are populated.
    """

    kind: str
    intervals: IntervalUnion | None = None
    scale: float | None = None
    body: SymmetricConvexGauge | None = None
    value: float | None = None
    std_error: float | None = None
    sample_count: int | None = None
    metadata: dict = field(default_factory=dict)

    def contains(self, points):
        if self.kind == "exact_interval_union":
            return self.intervals.contains(points)
        if self.kind == "exact_gauge_scaled":
            # A_delta is the complement of scale * B
            return self.body.value(points) >= self.scale
        raise DomainError("Monte Carlo results carry no membership oracle")

    def to_dict(self):
        d = {"kind": self.kind, "metadata": self.metadata}
        if self.intervals is not None:
            d["intervals"] = self.intervals.to_dict()["intervals"]
            d["measure"] = self.intervals.measure
        if self.scale is not None:
            d["scale"] = self.scale
        if self.value is not None:
            d.update(value=self.value, std_error=self.std_error, sample_count=self.sample_count)
        return d


def line_measure(s: SetOracle, x, y) -> float:
    """``m_[x,y](s)``; the Dirac convention applies when x == y."""
    return s.line_measure(x, y)


def _check_delta(delta):
    if not 0.0 <= delta < 1.0:
        raise DomainError("delta must lie in [0, 1)")


def _check_inside(u: IntervalUnion, f_lo, f_hi, name):
    for iv in u:
        if iv.lo < f_lo or iv.hi > f_hi:
            raise DomainError(f"{name} must be contained in F = [{f_lo}, {f_hi}]")


def _gap_piece(gap: Interval, lo_thr=None, hi_thr=None):
    """``gap`` intersected with ``(lo_thr, inf)`` or ``(-inf, hi_thr)``."""
    lo, lo_c, hi, hi_c = gap.lo, gap.lo_closed, gap.hi, gap.hi_closed
    if lo_thr is not None and lo_thr >= lo:
        lo, lo_c = lo_thr, False
    if hi_thr is not None and hi_thr <= hi:
        hi, hi_c = hi_thr, False
    if hi < lo or (hi == lo and not (lo_c and hi_c)):
        return None
    return Interval(lo, hi, lo_c, hi_c)


def dilate_intervals_1d(B: IntervalUnion, F, delta: float) -> IntervalUnion:
    """Exact ``B^delta`` inside ``F = [f_lo, f_hi]``.

    For x in a gap of B, the best witness y to the right is the right end e
    of some B-interval, and ``m_[x,e](B) = S / (e - x)`` with S the length of
    B between the gap and e; the condition ``S / (e - x) > delta`` is the
    open half-line ``x > e - S / delta``. The left side is symmetric.
    """
    _check_delta(delta)
    f_lo, f_hi = map(float, F)
    _check_inside(B, f_lo, f_hi, "B")
    solid = [iv for iv in B if iv.length > 0]
    gaps = B.complement(f_lo, f_hi)
    pieces = list(B.intervals)
    for gap in gaps:
        right = [iv for iv in solid if iv.lo >= gap.hi]
        left = [iv for iv in solid if iv.hi <= gap.lo]
        if right:
            if delta == 0.0:
                thr = -np.inf
            else:
                acc = np.cumsum([iv.length for iv in right])
                thr = min(iv.hi - s / delta for iv, s in zip(right, acc))
            piece = _gap_piece(gap, lo_thr=thr)
            if piece is not None:
                pieces.append(piece)
        if left:
            if delta == 0.0:
                thr = np.inf
            else:
                acc = np.cumsum([iv.length for iv in reversed(left)])
                thr = max(iv.lo + s / delta for iv, s in zip(reversed(left), acc))
            piece = _gap_piece(gap, hi_thr=thr)
            if piece is not None:
                pieces.append(piece)
    return IntervalUnion(pieces, ambient=B.ambient)


def contract_intervals_1d(A: IntervalUnion, F, delta: float) -> IntervalUnion:
    """Exact ``A_delta`` inside ``F = [f_lo, f_hi]`` by a direct sweep.

    For x in an A-interval ``[l, r]``, the worst segment to the right ends
    at the far end g of a gap of A, where the A-fraction is
    ``(r - x + T) / (g - x)`` with T the A-length strictly between; requiring
    it to be at least ``1 - delta`` gives ``x <= (r + T - (1 - delta) g) / delta``.
    The left side is symmetric. Gaps of zero length impose nothing.
    """
    _check_delta(delta)
    f_lo, f_hi = map(float, F)
    _check_inside(A, f_lo, f_hi, "A")
    gaps = [g for g in A.complement(f_lo, f_hi) if g.length > 0]
    ivs = A.intervals
    out = []
    for iv in ivs:
        r_bound, l_bound = np.inf, -np.inf
        for g in gaps:
            if g.lo >= iv.hi:
                between = sum(j.length for j in ivs if j.lo >= iv.hi and j.hi <= g.lo)
                if delta == 0.0:
                    r_bound = -np.inf
                else:
                    r_bound = min(r_bound, (iv.hi + between - (1.0 - delta) * g.hi) / delta)
            elif g.hi <= iv.lo:
                between = sum(j.length for j in ivs if j.hi <= iv.lo and j.lo >= g.hi)
                if delta == 0.0:
                    l_bound = np.inf
                else:
                    l_bound = max(l_bound, (iv.lo - between - (1.0 - delta) * g.lo) / delta)
        lo, lo_c = iv.lo, iv.lo_closed
        hi, hi_c = iv.hi, iv.hi_closed
        if l_bound > lo:
            lo, lo_c = l_bound, True
        if r_bound < hi:
            hi, hi_c = r_bound, True
        if hi < lo or (hi == lo and not (lo_c and hi_c)):
            continue
        out.append(Interval(lo, hi, lo_c, hi_c))
    return IntervalUnion(out, ambient=A.ambient)


def dilate_symmetric_complement(gauge: SymmetricConvexGauge, delta: float) -> DilationResult:
    """``A_delta`` for A the complement of the open body ``{gauge < 1}``.

    The contraction is the complement of the scaled body ``(2/delta - 1) B``.
    """
    if not 0.0 < delta <= 1.0:
        raise DomainError("delta must lie in (0, 1]; A_0 needs separate handling")
    scale = 2.0 / delta - 1.0
    return DilationResult("exact_gauge_scaled", scale=scale, body=gauge,
                          metadata={"delta": delta})


# ------------------------------------------------------------- Monte Carlo


def _support_box(model, points):
    if getattr(model, "is_bounded", False):
        lo, hi = model.bounding_box()
    else:
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        pad = 0.05 * np.maximum(hi - lo, 1e-9)
        lo, hi = lo - pad, hi + pad
    return np.asarray(lo, float), np.asarray(hi, float)


def _extreme_points(lo, hi):
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    n = lo.shape[0]
    pts = []
    for i in range(n):
        for s in (-1.0, 1.0):
            p = center.copy()
            p[i] += s * half[i]
            pts.append(p)
    return np.array(pts)


def witness_scores(B: SetOracle, X, pool, extremes, F: Polytope, directions: int,
                   seed, refine: int = 8, workers: int | None = None):
    """Best segment measure ``max_y m_[x,y](B)`` over a witness set, per point.

    Witnesses: ``directions`` random pool points, as many pool points lying
    in B (the best witnesses sit on the far side of B), the extreme points,
    and ``refine`` perturbations of the best of those. The procedure does not
    depend on delta, so thresholds at several deltas are nested.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    n_chunks = (N + _CHUNK - 1) // _CHUNK
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.spawn(max(n_chunks, 1))
    lo, hi = F.bounding_box() if F.A.shape[0] else (X.min(0), X.max(0))
    width = hi - lo
    pool_b = pool[B.contains(pool)]

    def run(k):
        rng = np.random.default_rng(seeds[k])
        xs = X[k * _CHUNK:(k + 1) * _CHUNK]
        m = xs.shape[0]
        best = B.contains(xs).astype(float)
        best_y = xs.copy()
        cands = [pool[rng.integers(0, pool.shape[0], m)] for _ in range(directions)]
        if pool_b.shape[0]:
            cands += [pool_b[rng.integers(0, pool_b.shape[0], m)] for _ in range(directions)]
        cands += [np.broadcast_to(e, xs.shape) for e in extremes]
        for y in cands:
            ok = F.contains(y)
            val = np.where(ok, B.line_measure_many(xs, y), 0.0)
            better = val > best
            best = np.where(better, val, best)
            best_y = np.where(better[:, None], y, best_y)
        for j in range(refine):
            step = 0.1 * width * 0.5**j
            y = best_y + rng.standard_normal(xs.shape) * step
            y = np.clip(y, lo, hi)
            ok = F.contains(y)
            val = np.where(ok, B.line_measure_many(xs, y), 0.0)
            better = val > best
            best = np.where(better, val, best)
            best_y = np.where(better[:, None], y, best_y)
        return best

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(n_chunks)))
    else:
        parts = [run(k) for k in range(n_chunks)]
    return np.concatenate(parts) if parts else np.zeros(0)


def estimate_dilated_measure(model, B: SetOracle, delta: float, samples: int = 100_000,
                             directions: int = 16, seed=0, F: Polytope | None = None,
                             workers: int | None = None) -> DilationResult:
    """Monte Carlo lower-bound estimate of ``mu(B^delta)``.

    A point counts as dilated when some witness segment exceeds delta;
    missed witnesses only under-count, so the estimate is biased low.
    """
    _check_delta(delta)
    if directions < 4:
        raise BudgetError("witness budget must be at least 4 directions")
    if samples < 1000:
        raise BudgetError("at least 1000 samples are required")
    if model.dim != B.dim:
        raise DomainError("model and set dimensions differ")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_points, s_pool, s_wit = ss.spawn(3)
    X = model.sample(samples, seed=s_points)
    if F is None:
        F = B.ambient
    if F is None:
        lo, hi = _support_box(model, X)
        F = box_polytope(lo, hi)
        f_note = {"F": "bounding box", "lo": lo.tolist(), "hi": hi.tolist()}
    else:
        f_note = {"F": "given", "polytope": F.to_dict()["polytope"]}
    pool = model.sample(min(samples, 4096), seed=s_pool)
    lo, hi = F.bounding_box()
    pool = np.clip(pool, lo, hi)
    extremes = _extreme_points(lo, hi)
    inside_f = F.contains(X)
    scores = witness_scores(B, X, pool, extremes, F, directions, s_wit, workers=workers)
    hits = (scores > delta) & inside_f
    v = float(np.mean(hits))
    se = float(np.sqrt(max(v * (1.0 - v), 0.0) / samples))
    meta = {
        "estimator": "lower bound (witness search)",
        "delta": delta,
        "directions": directions,
        "mu_B_hat": float(np.mean(B.contains(X))),
        **f_note,
    }
    res = DilationResult("monte_carlo", value=v, std_error=se, sample_count=samples, metadata=meta)
    res.scores = scores
    return res
