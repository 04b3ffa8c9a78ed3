"""Exact arithmetic on convex polygons in the plane.

Polygons are ``(k, 2)`` vertex arrays in counter-clockwise order. Moments
come from the shoelace-type formulas; clipping is a single-plane
Sutherland-Hodgman pass, which is exact for convex input.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .errors import ConstructionError

__all__ = [
    "polygon_area",
    "polygon_centroid",
    "polygon_second_moments",
    "polygon_moments",
    "clip_halfplane",
    "polygon_from_polytope",
    "regular_polygon",
    "polygon_disk_area",
    "polygon_extent",
    "chord_lengths",
]


def _cross_terms(P):
    x, y = P[:, 0], P[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return x, y, xn, yn, x * yn - xn * y


def polygon_area(P) -> float:
    P = np.asarray(P, dtype=float)
    if P.shape[0] < 3:
        return 0.0
    *_, cr = _cross_terms(P - P[0])
    return 0.5 * float(cr.sum())


def polygon_moments(P):
    """Area, first moments ``(Mx, My)`` and second moments ``(Mxx, Mxy, Myy)``."""
    P = np.asarray(P, dtype=float)
    if P.shape[0] < 3:
        return 0.0, np.zeros(2), np.zeros(3)
    # shift to a local origin to limit cancellation on tiny polygons
    o = P.mean(axis=0)
    x, y, xn, yn, cr = _cross_terms(P - o)
    a = 0.5 * cr.sum()
    mx = (cr * (x + xn)).sum() / 6.0
    my = (cr * (y + yn)).sum() / 6.0
    mxx = (cr * (x * x + x * xn + xn * xn)).sum() / 12.0
    myy = (cr * (y * y + y * yn + yn * yn)).sum() / 12.0
    mxy = (cr * (x * yn + 2 * x * y + 2 * xn * yn + xn * y)).sum() / 24.0
    # translate back to the global origin
    first = np.array([mx + o[0] * a, my + o[1] * a])
    sxx = mxx + 2 * o[0] * mx + o[0] ** 2 * a
    syy = myy + 2 * o[1] * my + o[1] ** 2 * a
    sxy = mxy + o[0] * my + o[1] * mx + o[0] * o[1] * a
    return float(a), first, np.array([sxx, sxy, syy])


def polygon_centroid(P) -> np.ndarray:
    a, first, _ = polygon_moments(P)
    if a <= 0:
        return np.asarray(P, dtype=float).mean(axis=0)
    return first / a


def polygon_second_moments(P) -> np.ndarray:
    """Covariance matrix of the uniform distribution on the polygon."""
    P = np.asarray(P, dtype=float)
    o = polygon_centroid(P)
    a, _, (sxx, sxy, syy) = polygon_moments(P - o)
    return np.array([[sxx, sxy], [sxy, syy]]) / a


def clip_halfplane(P, w, c) -> np.ndarray:
    """``P`` intersected with ``{x : w . x <= c}``."""
    P = np.asarray(P, dtype=float)
    if P.shape[0] == 0:
        return P
    w = np.asarray(w, dtype=float)
    s = P @ w - c
    inside = s <= 0
    if inside.all():
        return P
    if not inside.any():
        return np.zeros((0, 2))
    Q = np.roll(P, -1, axis=0)
    sq = np.roll(s, -1)
    out = []
    for p, q, sp, sqv, ip in zip(P, Q, s, sq, inside):
        if ip:
            out.append(p)
        if (sp <= 0) != (sqv <= 0):
            t = sp / (sp - sqv)
            out.append(p + t * (q - p))
    R = np.array(out)
    if R.shape[0] > 1:
        keep = np.linalg.norm(R - np.roll(R, -1, axis=0), axis=1) > 1e-15
        R = R[keep]
    return R if R.shape[0] >= 3 else np.zeros((0, 2))


def polygon_from_polytope(A, c, interior_point) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape[1] != 2:
        raise ConstructionError("polygon conversion needs a planar polytope")
    hs = HalfspaceIntersection(np.hstack([A, -np.asarray(c, float)[:, None]]),
                               np.asarray(interior_point, dtype=float))
    pts = hs.intersections
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def regular_polygon(radius: float, count: int = 4096, center=(0.0, 0.0),
                    preserve_area: bool = True) -> np.ndarray:
    """Regular ``count``-gon, scaled to the disk's area when asked."""
    theta = 2 * np.pi * np.arange(count) / count
    r = radius
    if preserve_area:
        r = radius * math.sqrt(math.pi / (0.5 * count * math.sin(2 * math.pi / count)))
    return np.asarray(center, float) + r * np.column_stack([np.cos(theta), np.sin(theta)])


def _edge_disk_area(p, q, r):
    """Signed area of triangle (0, p, q) intersected with the disk of radius r."""
    d = q - p
    a = d @ d
    if a == 0:
        return 0.0
    b = 2 * p @ d
    cc = p @ p - r * r
    disc = b * b - 4 * a * cc

    def sector(u, v):
        return 0.5 * r * r * math.atan2(u[0] * v[1] - u[1] * v[0], u @ v)

    if disc <= 0:
        return sector(p, q)
    s = math.sqrt(disc)
    t1 = min(max((-b - s) / (2 * a), 0.0), 1.0)
    t2 = min(max((-b + s) / (2 * a), 0.0), 1.0)
    u1 = p + t1 * d
    u2 = p + t2 * d
    total = 0.0
    if t1 > 0:
        total += sector(p, u1)
    if t2 > t1:
        total += 0.5 * (u1[0] * u2[1] - u1[1] * u2[0])
    if t2 < 1:
        total += sector(u2, q)
    return total


def polygon_disk_area(P, radius: float, center=(0.0, 0.0)) -> float:
    """Area of a convex polygon intersected with a disk."""
    P = np.asarray(P, dtype=float) - np.asarray(center, dtype=float)
    if P.shape[0] < 3:
        return 0.0
    Q = np.roll(P, -1, axis=0)
    return float(sum(_edge_disk_area(p, q, radius) for p, q in zip(P, Q)))


def polygon_extent(P, direction) -> tuple[float, float]:
    s = np.asarray(P, dtype=float) @ np.asarray(direction, dtype=float)
    return float(s.min()), float(s.max())


def chord_lengths(P, direction, s):
    """Length of ``P`` cut by the lines ``{x : direction . x = s}``."""
    P = np.asarray(P, dtype=float)
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    perp = np.array([-e[1], e[0]])
    a = P @ e
    b = P @ perp
    an, bn = np.roll(a, -1), np.roll(b, -1)
    s = np.atleast_1d(np.asarray(s, dtype=float))[:, None]
    lo_e = np.minimum(a, an)
    hi_e = np.maximum(a, an)
    hit = (s >= lo_e) & (s <= hi_e) & (hi_e > lo_e)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (s - a) / (an - a)
    val = b + t * (bn - b)
    top = np.where(hit, val, -np.inf).max(axis=1)
    bot = np.where(hit, val, np.inf).min(axis=1)
    return np.where(np.isfinite(top) & np.isfinite(bot), np.maximum(top - bot, 0.0), 0.0)
