"""Bisection of a convex body down to a needle.

Each step picks a frame (z, x, y) in the current body, turns the cutting
hyperplane ``{Lambda_theta(xi - z) = 0}`` with
``Lambda_theta = cos(theta) lambda_x + sin(theta) lambda_y`` until both
halves carry half of the u-integral, and keeps a half on which v still has
positive integral. Turning theta by pi swaps the halves, so
``g(theta) = Psi(theta) - (1/2) int u`` changes sign on ``[0, pi]``.

Two backends compute the integrals: exact polygon arithmetic for uniform
measures in the plane, and Monte Carlo reweighting of a fixed sample for
everything else.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import polygon as poly
from .core import AffineForm, as_alpha
from .errors import BudgetError, ConvergenceError, DomainError, HypothesisError
from .functions import CatalogFunction, parse_function
from .measures import LebesgueInterval, MeasureModel, UniformBody
from .needles import (
    Needle,
    NeedleFit,
    fit_needle,
    make_needle,
    needle_integrate,
    needle_to_dict,
)
from .sets import EuclideanGauge

__all__ = [
    "CutFrame",
    "BisectionState",
    "BalanceResult",
    "LocalizationResult",
    "ExactPolygonBackend",
    "MonteCarloBackend",
    "make_backend",
    "balance_halfspace",
    "bisection_step",
    "run_localization",
]

_GRID = 64
_THETA_TOL = 1e-10
_DISK_VERTICES = 4096
_FIT_POINTS = 4000
_RESAMPLE_FRACTION = 0.05


@dataclass(frozen=True)
class CutFrame:
    """Points x, y, z and the dual forms with ``lambda_x(x - z) = 1`` etc."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    lambda_x: AffineForm
    lambda_y: AffineForm
    theta: float = 0.0

    @classmethod
    def from_points(cls, x, y, z) -> "CutFrame":
        x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
        M = np.column_stack([x - z, y - z])
        if np.linalg.matrix_rank(M, tol=1e-12) < 2:
            raise DomainError("frame points must be affinely independent")
        L = np.linalg.pinv(M)
        return cls(x, y, z, AffineForm(0.0, L[0]), AffineForm(0.0, L[1]))

    def normal(self, theta: float) -> np.ndarray:
        return math.cos(theta) * self.lambda_x.gradient + math.sin(theta) * self.lambda_y.gradient

    def offset(self, theta: float) -> float:
        return float(self.normal(theta) @ self.z)

    def duality_residual(self) -> float:
        dx, dy = self.x - self.z, self.y - self.z
        return float(max(abs(self.lambda_x(dx) - 1), abs(self.lambda_y(dy) - 1),
                         abs(self.lambda_x(dy)), abs(self.lambda_y(dx))))


@dataclass
class BisectionState:
    step: int
    mass: float
    u_integral: float
    v_integral: float
    width: float
    theta: float | None = None
    balance_residual: float | None = None
    identity_residual: float | None = None
    tolerance: float | None = None

    def summary(self) -> dict:
        return {
            "step": self.step,
            "mass": self.mass,
            "u_integral": self.u_integral,
            "v_integral": self.v_integral,
            "width": self.width,
            "theta": self.theta,
            "balance_residual": self.balance_residual,
            "identity_residual": self.identity_residual,
        }


@dataclass
class BalanceResult:
    theta: float
    residual: float
    identity_residual: float
    tolerance: float
    psi: float
    total: float


# ------------------------------------------------------------------ backends


class ExactPolygonBackend:
    """Uniform measure on a planar convex polygon, integrals in closed form.

    A disk is replaced by an area-preserving regular polygon with many
    vertices.
    """

    exact = True

    def __init__(self, model: UniformBody, u: CatalogFunction, v: CatalogFunction):
        if not isinstance(model, UniformBody) or model.dim != 2:
            raise DomainError("exact backend needs a planar uniform body")
        body = model.body
        if isinstance(body, EuclideanGauge):
            self.P = poly.regular_polygon(body.radius, _DISK_VERTICES, body.center)
        else:
            self.P = poly.polygon_from_polytope(body.A, body.c, body.interior_point)
        self.funcs = {"u": u, "v": v}
        self.area0 = poly.polygon_area(self.P)
        self.mass = 1.0

    def _integral(self, name, P):
        return self.funcs[name].polygon_integral(P)

    def total(self, name) -> float:
        return self._integral(name, self.P) / poly.polygon_area(self.P)

    def half(self, normal, offset, plus=True):
        if plus:
            return poly.clip_halfplane(self.P, -normal, -offset)
        return poly.clip_halfplane(self.P, normal, offset)

    def psi(self, name, normal, offset, plus=True) -> float:
        return self._integral(name, self.half(normal, offset, plus)) / poly.polygon_area(self.P)

    def psi_error(self, name, normal, offset) -> float:
        return 0.0

    def axes(self):
        cov = poly.polygon_second_moments(self.P)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        return poly.polygon_centroid(self.P), evals[order], evecs[:, order]

    def extents(self, evecs):
        return [np.ptp(self.P @ evecs[:, i]) for i in range(evecs.shape[1])]

    def cut(self, normal, offset, plus):
        Q = self.half(normal, offset, plus)
        frac = poly.polygon_area(Q) / poly.polygon_area(self.P)
        self.P = Q
        self.mass *= frac
        return frac

    def needle_data(self, e, z):
        s_lo, s_hi = poly.polygon_extent(self.P, e)
        s = s_lo + (np.arange(_FIT_POINTS) + 0.5) / _FIT_POINTS * (s_hi - s_lo)
        w = poly.chord_lengths(self.P, e, s)
        base = z - (z @ e) * e
        return base + s_lo * e, base + s_hi * e, (s - s_lo) / (s_hi - s_lo), w


class MonteCarloBackend:
    """Reweighting of one model sample, with resample-move when it thins out."""

    exact = False

    def __init__(self, model: MeasureModel, u, v, samples: int = 20_000, seed=0):
        if samples < 1000:
            raise BudgetError("Monte Carlo localization needs at least 1000 samples")
        self.model = model
        self.rng = np.random.default_rng(seed)
        self.N = int(samples)
        self.funcs = {"u": u, "v": v}
        self.X = model.sample(self.N, self.rng)
        self.A = np.zeros((0, model.dim))
        self.c = np.zeros(0)
        self.alive = np.ones(self.N, dtype=bool)
        self.mass = 1.0
        self._evaluate()

    def _evaluate(self):
        self.vals = {k: np.asarray(f(self.X), dtype=float) for k, f in self.funcs.items()}

    def _side(self, normal, offset, plus=True):
        s = self.X @ normal - offset
        return s >= 0 if plus else s < 0

    def total(self, name) -> float:
        return float(self.vals[name][self.alive].mean())

    def psi(self, name, normal, offset, plus=True) -> float:
        sel = self.alive & self._side(normal, offset, plus)
        return float(self.vals[name][sel].sum() / self.alive.sum())

    def psi_error(self, name, normal, offset) -> float:
        sel = self._side(normal, offset)[self.alive]
        y = self.vals[name][self.alive] * sel
        return float(y.std() / math.sqrt(y.shape[0]))

    def axes(self):
        Y = self.X[self.alive]
        z = Y.mean(axis=0)
        evals, evecs = np.linalg.eigh(np.atleast_2d(np.cov(Y.T)))
        order = np.argsort(evals)[::-1]
        return z, evals[order], evecs[:, order]

    def extents(self, evecs):
        Y = self.X[self.alive]
        out = []
        for i in range(evecs.shape[1]):
            p = Y @ evecs[:, i]
            lo, hi = np.quantile(p, [0.001, 0.999])
            out.append(hi - lo)
        return out

    def cut(self, normal, offset, plus):
        keep = self._side(normal, offset, plus)
        frac = float((self.alive & keep).sum() / self.alive.sum())
        self.A = np.vstack([self.A, (-normal if plus else normal)[None, :]])
        self.c = np.append(self.c, -offset if plus else offset)
        self.alive &= keep
        self.mass *= frac
        if self.alive.sum() < _RESAMPLE_FRACTION * self.N:
            self._resample_move()
        return frac

    def _inside(self, Y):
        ok = np.all(Y @ self.A.T <= self.c + 1e-12, axis=1)
        if self.model.support is not None:
            ok &= self.model.support.contains(Y)
        return ok

    def _resample_move(self, moves: int = 20):
        if not self.model.has_density:
            raise BudgetError("resample-move needs a density oracle")
        idx = np.flatnonzero(self.alive)
        if idx.size < 10:
            raise BudgetError("too few surviving samples to resample")
        Y = self.X[self.rng.choice(idx, self.N)]
        cov = np.atleast_2d(np.cov(self.X[idx].T)) + 1e-18 * np.eye(self.model.dim)
        chol = np.linalg.cholesky(cov)
        scale = 2.38 / math.sqrt(self.model.dim)
        fy = self.model.density(Y)
        for _ in range(moves):
            prop = Y + scale * self.rng.standard_normal(Y.shape) @ chol.T
            fp = np.where(self._inside(prop), self.model.density(prop), 0.0)
            accept = self.rng.random(self.N) * fy < fp
            Y = np.where(accept[:, None], prop, Y)
            fy = np.where(accept, fp, fy)
        self.X = Y
        self.alive = np.ones(self.N, dtype=bool)
        self._evaluate()

    def needle_data(self, e, z):
        p = self.X[self.alive] @ e
        lo, hi = float(p.min()), float(p.max())
        base = z - (z @ e) * e
        span = hi - lo if hi > lo else 1.0
        return base + lo * e, base + hi * e, (p - lo) / span, np.ones_like(p)


def make_backend(model, u, v, backend="auto", samples=20_000, seed=0):
    exact_ok = (isinstance(model, UniformBody) and model.dim == 2
                and all(hasattr(f, "polygon_integral") for f in (u, v)))
    if exact_ok:
        try:
            u.polygon_integral(np.array([[0, 0], [1, 0], [0, 1.0]]))
            v.polygon_integral(np.array([[0, 0], [1, 0], [0, 1.0]]))
        except NotImplementedError:
            exact_ok = False
    if backend == "exact" or (backend == "auto" and exact_ok):
        if not exact_ok:
            raise DomainError("exact backend needs a planar uniform body and catalog functions")
        return ExactPolygonBackend(model, u, v)
    if backend not in ("auto", "mc"):
        raise DomainError(f"unknown backend {backend!r}")
    return MonteCarloBackend(model, u, v, samples, seed)


# ----------------------------------------------------------------- operations


def _frame(backend) -> tuple[CutFrame, float]:
    z, evals, evecs = backend.axes()
    if evecs.shape[1] < 2:
        raise DomainError("bisection needs dimension at least 2")
    ext = backend.extents(evecs)
    x = z + 0.5 * ext[0] * evecs[:, 0]
    # floor the short side so a collapsed cell still yields a valid frame
    y = z + 0.5 * max(ext[1], 1e-9 * ext[0]) * evecs[:, 1]
    return CutFrame.from_points(x, y, z), float(ext[1])


def balance_halfspace(backend, frame: CutFrame, name: str = "u") -> BalanceResult:
    """Angle whose halfspace ``H+`` carries half of the integral of ``name``.

    Scans a 64-interval grid on ``[0, pi]`` and refines the sign change
    closest to ``pi/2``, which cuts along the long principal axis.
    """
    total = backend.total(name)

    def g(theta):
        return backend.psi(name, frame.normal(theta), frame.offset(theta)) - 0.5 * total

    thetas = np.linspace(0.0, math.pi, _GRID + 1)
    vals = np.array([g(t) for t in thetas])
    base_tol = 1e-6 * abs(total) if backend.exact else 0.0
    zero = np.flatnonzero(np.abs(vals) <= max(base_tol * 1e-3, 1e-15))
    brackets = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    candidates = [(abs(thetas[i] - math.pi / 2), thetas[i], None) for i in zero]
    candidates += [(abs(0.5 * (thetas[i] + thetas[i + 1]) - math.pi / 2), thetas[i], i)
                   for i in brackets]
    if not candidates:
        raise ConvergenceError("no sign change in the balance function")
    _, theta, i = min(candidates, key=lambda c: c[0])
    if i is not None:
        theta = optimize.brentq(g, thetas[i], thetas[i + 1], xtol=_THETA_TOL)
    n, off = frame.normal(theta), frame.offset(theta)
    psi = backend.psi(name, n, off)
    psi_opp = backend.psi(name, -n, -off)
    se = backend.psi_error(name, n, off)
    tol = max(1e-6 * abs(total), 2 * se)
    res = abs(psi - 0.5 * total)
    return BalanceResult(float(theta), float(res), float(psi + psi_opp - total), float(tol),
                         float(psi), float(total))


def bisection_step(backend, state: BisectionState) -> BisectionState:
    """One balanced cut; keeps a half with positive v-integral."""
    if not (state.u_integral > 0 and state.v_integral > 0):
        raise HypothesisError("bisection needs positive u- and v-integrals")
    frame, _ = _frame(backend)
    bal = balance_halfspace(backend, frame, "u")
    n, off = frame.normal(bal.theta), frame.offset(bal.theta)
    v_plus = backend.psi("v", n, off, plus=True)
    v_minus = backend.psi("v", n, off, plus=False)
    if v_plus <= 0 and v_minus <= 0:
        raise BudgetError("v nonpositive on both halves")
    plus = v_plus >= v_minus
    frac = backend.cut(n, off, plus)
    if frac <= 0:
        raise ConvergenceError("cut removed the whole body")
    _, evals, evecs = backend.axes()
    width = float(sorted(backend.extents(evecs), reverse=True)[1])
    return BisectionState(
        step=state.step + 1,
        mass=backend.mass,
        u_integral=backend.total("u"),
        v_integral=backend.total("v"),
        width=width,
        theta=bal.theta,
        balance_residual=bal.residual,
        identity_residual=bal.identity_residual,
        tolerance=bal.tolerance,
    )


@dataclass
class LocalizationResult:
    needle: Needle
    fit: NeedleFit | None
    trace: list
    u_needle: float
    v_needle: float
    converged: bool
    steps: int
    width: float
    diameter: float
    backend: str
    residuals: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        eps = self.residuals.get("epsilon_report", 1e-3)
        return self.converged and self.u_needle >= -eps and self.v_needle >= -eps

    def to_dict(self) -> dict:
        return {
            "needle": needle_to_dict(self.needle),
            "u_needle": self.u_needle,
            "v_needle": self.v_needle,
            "converged": self.converged,
            "steps": self.steps,
            "width": self.width,
            "diameter": self.diameter,
            "backend": self.backend,
            "fit_ks": self.fit.ks_distance if self.fit else None,
            "residuals": self.residuals,
            "pass": self.passed,
        }

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(s, sort_keys=True) + "\n" for s in self.trace)


class _Shift(CatalogFunction):
    """``f - eps``, kept exact on polygons."""

    def __init__(self, f, eps):
        self.f, self.eps = f, float(eps)
        self.spec = f"{getattr(f, 'spec', 'u')}-{eps:g}"

    def __call__(self, points):
        return self.f(points) - self.eps

    def polygon_integral(self, P):
        return self.f.polygon_integral(P) - self.eps * poly.polygon_area(P)

    def segment_breakpoints(self, a, b):
        finder = getattr(self.f, "segment_breakpoints", None)
        return finder(a, b) if finder else []


def _as_function(f, model):
    if isinstance(f, str):
        return parse_function(f, model.dim, model.center)
    return f


def run_localization(model: MeasureModel, u, v, max_steps: int = 60,
                     width_tol: float = 1e-3, backend: str = "auto",
                     samples: int = 20_000, seed=0, epsilon: float = 0.0,
                     epsilon_report: float = 1e-3) -> LocalizationResult:
    """Bisect until the body is thinner than ``width_tol`` times its diameter.

    ``epsilon`` replaces u, v by ``u - epsilon``, ``v - epsilon`` first. The
    run fails (``converged`` false) if ``max_steps`` is reached.
    """
    u = _as_function(u, model)
    v = _as_function(v, model)
    if epsilon:
        u, v = _Shift(u, epsilon), _Shift(v, epsilon)

    if model.dim == 1:
        if not isinstance(model, LebesgueInterval):
            raise DomainError("one-dimensional localization supports the Lebesgue interval")
        needle = make_needle([model.a], [model.b], 1.0)
        uu, vv = needle_integrate(needle, u), needle_integrate(needle, v)
        if not (uu > 0 and vv > 0):
            raise HypothesisError("initial integrals must be positive")
        trace = [BisectionState(0, 1.0, uu, vv, 0.0).summary()]
        return LocalizationResult(needle, None, trace, uu, vv, True, 0, 0.0,
                                  model.b - model.a, "exact",
                                  {"epsilon_report": epsilon_report})

    be = make_backend(model, u, v, backend, samples, seed)
    u0, v0 = be.total("u"), be.total("v")
    if not (u0 > 0 and v0 > 0):
        raise HypothesisError(f"initial integrals must be positive (u={u0:.6g}, v={v0:.6g})")
    _, _, evecs = be.axes()
    ext = be.extents(evecs)
    diameter = float(max(ext))
    width = float(sorted(ext, reverse=True)[1])
    state = BisectionState(0, 1.0, u0, v0, width)
    trace = [state.summary()]
    max_balance = max_identity = 0.0
    balance_ok = True
    while state.width >= width_tol * diameter and state.step < max_steps:
        state = bisection_step(be, state)
        trace.append(state.summary())
        max_balance = max(max_balance, state.balance_residual / max(abs(trace[-2]["u_integral"]), 1e-300))
        max_identity = max(max_identity, abs(state.identity_residual))
        balance_ok &= state.balance_residual <= state.tolerance
    converged = state.width < width_tol * diameter

    z, _, evecs = be.axes()
    a, b, t, w = be.needle_data(evecs[:, 0], z)
    alpha = model.alpha_declared
    if not (alpha.value <= 0.5 or alpha.value == 1.0):
        alpha = as_alpha(0.5)
    fit = fit_needle(np.clip(t, 0, 1), alpha, weights=w, a=a, b=b, clip=True)
    needle = fit.needle
    uu, vv = needle_integrate(needle, u), needle_integrate(needle, v)
    residuals = {
        "max_relative_balance_residual": max_balance,
        "max_identity_residual": max_identity,
        "balance_within_tolerance": bool(balance_ok),
        "epsilon_report": epsilon_report,
        "fit_clipped": fit.clipped,
    }
    return LocalizationResult(needle, fit, trace, uu, vv, converged, state.step,
                              state.width, diameter, "exact" if be.exact else "monte_carlo",
                              residuals)
