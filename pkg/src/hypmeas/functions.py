"""Test functions u, v for localization and deviation checks.

A small catalog parsed from strings:

``const:c``
    the constant c.
``affine:c0,w1,...,wn``
    ``c0 + w . x``.
``norm``
    the Euclidean norm.
``indicator-ball:r``
    indicator of the closed r-ball around the model centre.
``indicator-halfspace:w1,...,wn,c``
    indicator of ``{w . x <= c}``.
``shifted-indicator:SET,p``
    ``1_SET - p``. SET is ``halfspace`` (left half), ``halfspace-right``,
    ``halfspace-top``, ``halfspace-bottom`` (split through the model
    centre), ``ball:r`` or ``halfspace:w1,...,wn,c``.

Every function is vectorized over rows, exposes the parameters where it is
discontinuous along a segment, and integrates exactly over planar convex
polygons when that makes sense.
"""
from __future__ import annotations

import math

import numpy as np

from . import polygon as poly
from .errors import ConstructionError

__all__ = [
    "CatalogFunction",
    "Const",
    "Affine",
    "Norm",
    "IndicatorBall",
    "IndicatorHalfspace",
    "Shifted",
    "parse_function",
]


def _rows(points, dim=None):
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[None, :] if dim is None or p.shape[0] == dim else p[:, None]
    return p


class CatalogFunction:
    spec: str = ""

    def __call__(self, points):
        raise NotImplementedError

    def polygon_integral(self, P) -> float:
        raise NotImplementedError(f"{self.spec} has no exact polygon integral")

    def segment_breakpoints(self, a, b):
        return []

    def __repr__(self):
        return f"{type(self).__name__}({self.spec!r})"


class Const(CatalogFunction):
    def __init__(self, c: float):
        self.c = float(c)
        self.spec = f"const:{self.c:g}"

    def __call__(self, points):
        return np.full(_rows(points).shape[0], self.c)

    def polygon_integral(self, P):
        return self.c * poly.polygon_area(P)


class Affine(CatalogFunction):
    def __init__(self, c0: float, w):
        self.c0 = float(c0)
        self.w = np.atleast_1d(np.asarray(w, dtype=float))
        self.spec = "affine:" + ",".join(f"{v:g}" for v in [self.c0, *self.w])

    def __call__(self, points):
        return self.c0 + _rows(points, self.w.shape[0]) @ self.w

    def polygon_integral(self, P):
        a, first, _ = poly.polygon_moments(P)
        return self.c0 * a + float(first @ self.w)


class Norm(CatalogFunction):
    spec = "norm"

    def __call__(self, points):
        return np.linalg.norm(_rows(points), axis=1)


class IndicatorBall(CatalogFunction):
    def __init__(self, radius: float, center):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)
        self.spec = f"indicator-ball:{self.radius:g}"

    def __call__(self, points):
        d = _rows(points, self.center.shape[0]) - self.center
        return (np.sum(d * d, axis=1) <= self.radius**2).astype(float)

    def polygon_integral(self, P):
        return poly.polygon_disk_area(P, self.radius, self.center)

    def segment_breakpoints(self, a, b):
        a = np.asarray(a, float) - self.center
        d = np.asarray(b, float) - self.center - a
        qa, qb, qc = d @ d, 2 * a @ d, a @ a - self.radius**2
        disc = qb * qb - 4 * qa * qc
        if qa == 0 or disc <= 0:
            return []
        s = math.sqrt(disc)
        return [t for t in ((-qb - s) / (2 * qa), (-qb + s) / (2 * qa)) if 0 < t < 1]


class IndicatorHalfspace(CatalogFunction):
    def __init__(self, w, c: float, spec: str | None = None):
        self.w = np.atleast_1d(np.asarray(w, dtype=float))
        self.c = float(c)
        self.spec = spec or "indicator-halfspace:" + ",".join(f"{v:g}" for v in [*self.w, self.c])

    def __call__(self, points):
        return (_rows(points, self.w.shape[0]) @ self.w <= self.c).astype(float)

    def polygon_integral(self, P):
        return poly.polygon_area(poly.clip_halfplane(P, self.w, self.c))

    def segment_breakpoints(self, a, b):
        sa = float(np.asarray(a, float) @ self.w - self.c)
        sb = float(np.asarray(b, float) @ self.w - self.c)
        if sa == sb or (sa > 0) == (sb > 0):
            return []
        t = sa / (sa - sb)
        return [t] if 0 < t < 1 else []


class Shifted(CatalogFunction):
    """``1_S - p`` for an indicator ``1_S``."""

    def __init__(self, indicator: CatalogFunction, p: float, spec: str | None = None):
        self.indicator = indicator
        self.p = float(p)
        self.spec = spec or f"shifted-indicator:{indicator.spec},{self.p:g}"

    def __call__(self, points):
        return self.indicator(points) - self.p

    def polygon_integral(self, P):
        return self.indicator.polygon_integral(P) - self.p * poly.polygon_area(P)

    def segment_breakpoints(self, a, b):
        return self.indicator.segment_breakpoints(a, b)


_NAMED_HALFSPACES = {
    # axis, sign: 1 on {sign * (x_axis - centre_axis) <= 0}
    "halfspace": (0, 1.0),
    "halfspace-left": (0, 1.0),
    "halfspace-right": (0, -1.0),
    "halfspace-bottom": (1, 1.0),
    "halfspace-top": (1, -1.0),
}


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConstructionError(f"bad numeric list {text!r}") from None


def _parse_set(text, dim, center):
    if text in _NAMED_HALFSPACES:
        axis, sign = _NAMED_HALFSPACES[text]
        if axis >= dim:
            raise ConstructionError(f"{text} needs dimension > {axis}")
        w = np.zeros(dim)
        w[axis] = sign
        return IndicatorHalfspace(w, float(w @ center), spec=text)
    kind, _, args = text.partition(":")
    if kind == "ball":
        return IndicatorBall(float(args), center)
    if kind == "halfspace":
        vals = _floats(args)
        return IndicatorHalfspace(vals[:-1], vals[-1])
    raise ConstructionError(f"unknown set {text!r} in function spec")


def parse_function(text: str, dim: int = 2, center=None) -> CatalogFunction:
    """Parse a catalog string; named sets split through ``center``."""
    text = text.strip()
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    kind, _, args = text.partition(":")
    if kind == "const":
        return Const(float(args))
    if kind == "affine":
        vals = _floats(args)
        if len(vals) != dim + 1:
            raise ConstructionError(f"affine needs {dim + 1} coefficients")
        return Affine(vals[0], vals[1:])
    if kind == "norm":
        return Norm()
    if kind == "indicator-ball":
        return IndicatorBall(float(args), center)
    if kind == "indicator-halfspace":
        vals = _floats(args)
        if len(vals) != dim + 1:
            raise ConstructionError(f"indicator-halfspace needs {dim + 1} numbers")
        return IndicatorHalfspace(vals[:-1], vals[-1])
    if kind == "shifted-indicator":
        set_text, _, p = args.rpartition(",")
        if not set_text:
            raise ConstructionError("shifted-indicator needs SET,p")
        return Shifted(_parse_set(set_text, dim, center), float(p), spec=text)
    raise ConstructionError(f"unknown function kind {kind!r}")
