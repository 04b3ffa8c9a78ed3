"""Canonical alpha-concave measure models with samplers and density oracles.

Each model carries its declared concavity parameter: uniform measures on
n-dim convex bodies are 1/n-concave, Gaussians log-concave, the n-dim
Cauchy measure (-1)-concave and the Student path measure (-1/d)-concave.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, special
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .core import AlphaParam, as_alpha, as_ext, beta_from_alpha, generalized_mean
from .errors import BudgetError, ConstructionError, DomainError
from .sets import EuclideanGauge, Polytope, box_polytope, interval_polytope

__all__ = [
    "MeasureModel",
    "LebesgueInterval",
    "UniformBody",
    "Gaussian",
    "CauchyN",
    "StudentPath",
    "make_model",
    "sample",
    "LinearMap",
    "BetaConcavityReport",
    "check_beta_concavity",
    "ProjectionReport",
    "project_model",
    "kde_1d",
]

_MIN_ACCEPTANCE = 1e-4


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


class MeasureModel:
    """A probability measure on R^dim with a sampler.

    Subclasses set ``dim``, ``kind``, ``alpha_declared`` and ``support``
    (``None`` for the whole space) and implement ``sample``; all but the
    Student path measure expose a vectorized ``density``.
    """

    dim: int
    kind: str
    alpha_declared: AlphaParam
    support = None
    has_density = True

    def density(self, points):
        raise DomainError(f"{self.kind} has no density oracle")

    def sample(self, count: int, seed=None) -> np.ndarray:
        raise NotImplementedError

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.dim)

    def bounding_box(self):
        """Box containing the support; only bounded models define it."""
        raise DomainError(f"{self.kind} has unbounded support")

    @property
    def is_bounded(self) -> bool:
        return self.support is not None

    def _check_count(self, count):
        if int(count) < 1:
            raise DomainError("count must be at least 1")
        return int(count)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({json.dumps(self.to_dict())})"


class LebesgueInterval(MeasureModel):
    kind = "lebesgue"

    def __init__(self, a: float = 0.0, b: float = 1.0):
        if not b > a:
            raise ConstructionError("interval must have b > a")
        self.a, self.b = float(a), float(b)
        self.dim = 1
        self.alpha_declared = as_alpha(1.0)
        self.support = interval_polytope(self.a, self.b)

    def density(self, points):
        x = np.asarray(points, dtype=float).reshape(-1)
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, 1.0 / (self.b - self.a), 0.0)

    def sample(self, count, seed=None):
        count = self._check_count(count)
        return _rng(seed).uniform(self.a, self.b, size=(count, 1))

    @property
    def center(self):
        return np.array([0.5 * (self.a + self.b)])

    def bounding_box(self):
        return np.array([self.a]), np.array([self.b])

    def to_dict(self):
        return {"kind": "lebesgue", "interval": [self.a, self.b]}


def _polytope_volume(P: Polytope) -> float:
    if P.dim == 1:
        lo, hi = P.bounding_box()
        return float(hi[0] - lo[0])
    halfspaces = np.hstack([P.A, -P.c[:, None]])
    hs = HalfspaceIntersection(halfspaces, P.interior_point)
    return float(ConvexHull(hs.intersections).volume)


class UniformBody(MeasureModel):
    """Normalized Lebesgue measure on a polytope or a Euclidean ball."""

    kind = "uniform"

    def __init__(self, body):
        if not isinstance(body, (Polytope, EuclideanGauge)):
            raise ConstructionError("body must be a Polytope or a EuclideanGauge ball")
        self.body = body
        self.dim = body.dim
        if self.dim > 10:
            raise ConstructionError("uniform bodies are supported up to dimension 10")
        self.alpha_declared = as_alpha(1.0 / self.dim)
        self.support = body
        if isinstance(body, EuclideanGauge):
            n, r = self.dim, body.radius
            self.volume = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r**n
        else:
            if body.A.shape[0] == 0:
                raise ConstructionError("uniform measure needs a bounded body")
            self.volume = _polytope_volume(body)

    def density(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == 1 and pts.shape[0] == 1 and np.ndim(points) == 1:
            pts = pts.T
        return np.where(self.body.contains(pts), 1.0 / self.volume, 0.0)

    @property
    def center(self):
        if isinstance(self.body, EuclideanGauge):
            return self.body.center.copy()
        lo, hi = self.body.bounding_box()
        return 0.5 * (lo + hi) if self.dim == 1 else self.body.interior_point.copy()

    def bounding_box(self):
        if isinstance(self.body, EuclideanGauge):
            r = self.body.radius
            return self.body.center - r, self.body.center + r
        return self.body.bounding_box()

    def sample(self, count, seed=None):
        count = self._check_count(count)
        rng = _rng(seed)
        if isinstance(self.body, EuclideanGauge):
            return self._sample_ball(count, rng)
        if self.dim <= 3:
            return self._sample_rejection(count, rng)
        return self._sample_hit_and_run(count, rng)

    def _sample_ball(self, count, rng):
        n = self.dim
        z = rng.standard_normal((count, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = self.body.radius * rng.random(count) ** (1.0 / n)
        return self.body.center + z * r[:, None]

    def _sample_rejection(self, count, rng):
        lo, hi = self.bounding_box()
        rate = self.volume / float(np.prod(hi - lo))
        if rate < _MIN_ACCEPTANCE:
            raise BudgetError(f"rejection acceptance rate {rate:.2e} below {_MIN_ACCEPTANCE}")
        out, have = [], 0
        while have < count:
            batch = int(min(max((count - have) / rate * 1.2, 64), 5e6))
            x = rng.uniform(lo, hi, size=(batch, self.dim))
            x = x[self.body.contains(x, tol=0.0)]
            out.append(x)
            have += x.shape[0]
        return np.concatenate(out)[:count]

    def _sample_hit_and_run(self, count, rng):
        A, c = self.body.A, self.body.c
        n = self.dim
        chains = min(count, 1024)
        x = np.tile(self.body.interior_point, (chains, 1))

        def step(x):
            d = rng.standard_normal(x.shape)
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            slack = c[None, :] - x @ A.T
            rate = d @ A.T
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = slack / rate
            t_hi = np.where(rate > 0, ratio, np.inf).min(axis=1)
            t_lo = np.where(rate < 0, ratio, -np.inf).max(axis=1)
            t = t_lo + (t_hi - t_lo) * rng.random(x.shape[0])
            return x + t[:, None] * d

        for _ in range(100 * n):
            x = step(x)
        out = [x]
        have = chains
        while have < count:
            for _ in range(n):
                x = step(x)
            out.append(x)
            have += chains
        return np.concatenate(out)[:count]

    def to_dict(self):
        if isinstance(self.body, EuclideanGauge):
            return {"kind": "uniform", "ball": {"radius": self.body.radius, "dim": self.dim,
                                                "center": self.body.center.tolist()}}
        rows = np.hstack([self.body.A, self.body.c[:, None]]).tolist()
        return {"kind": "uniform", "polytope": rows}


class Gaussian(MeasureModel):
    kind = "gaussian"

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        n = self.mean.shape[0]
        if self.cov.shape != (n, n) or not np.allclose(self.cov, self.cov.T):
            raise ConstructionError("covariance must be a symmetric n x n matrix")
        try:
            self._chol = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise ConstructionError("covariance must be positive definite") from exc
        if np.min(np.diag(self._chol)) <= 1e-12 * np.max(np.diag(self._chol)):
            raise ConstructionError("covariance is numerically degenerate")
        self.dim = n
        self.alpha_declared = as_alpha(0.0)
        self._logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))

    @classmethod
    def standard(cls, dim: int):
        return cls(np.zeros(dim), np.eye(dim))

    def density(self, points):
        x = np.asarray(points, dtype=float).reshape(-1, self.dim) - self.mean
        z = np.linalg.solve(self._chol, x.T)
        q = np.sum(z * z, axis=0)
        return np.exp(-0.5 * (q + self._logdet + self.dim * math.log(2 * math.pi)))

    def sample(self, count, seed=None):
        count = self._check_count(count)
        z = _rng(seed).standard_normal((count, self.dim))
        return self.mean + z @ self._chol.T

    @property
    def center(self):
        return self.mean.copy()

    def to_dict(self):
        return {"kind": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist()}


class CauchyN(MeasureModel):
    """Standard n-dim Cauchy measure, density ``c_n (1 + |x|^2)^(-(n+1)/2)``."""

    kind = "cauchy"

    def __init__(self, dim: int = 1):
        if int(dim) < 1:
            raise ConstructionError("dimension must be positive")
        self.dim = int(dim)
        self.alpha_declared = as_alpha(-1.0)
        n = self.dim
        self.log_cn = special.gammaln((n + 1) / 2) - (n + 1) / 2 * math.log(math.pi)

    @property
    def c_n(self) -> float:
        return math.exp(self.log_cn)

    def density(self, points):
        x = np.asarray(points, dtype=float).reshape(-1, self.dim)
        r2 = np.sum(x * x, axis=1)
        return np.exp(self.log_cn - 0.5 * (self.dim + 1) * np.log1p(r2))

    def sample(self, count, seed=None):
        # X_i = Z_i / zeta with independent standard normals
        count = self._check_count(count)
        rng = _rng(seed)
        z = rng.standard_normal((count, self.dim))
        zeta = rng.standard_normal(count)
        return z / zeta[:, None]

    def to_dict(self):
        return {"kind": "cauchy", "dim": self.dim}


class StudentPath(MeasureModel):
    """Discretized Student path ``X(t) = sqrt(d)/chi_d * W(t)`` on ``t = k/grid``."""

    kind = "student"
    has_density = False

    def __init__(self, d: float = 1.0, grid: int = 64):
        if not d > 0:
            raise ConstructionError("d must be positive")
        if int(grid) < 1:
            raise ConstructionError("grid size must be positive")
        self.d = float(d)
        self.grid = int(grid)
        self.dim = self.grid
        self.alpha_declared = as_alpha(-1.0 / self.d)

    @property
    def times(self):
        return np.arange(1, self.grid + 1) / self.grid

    def sample(self, count, seed=None):
        count = self._check_count(count)
        rng = _rng(seed)
        inc = rng.standard_normal((count, self.grid)) * math.sqrt(1.0 / self.grid)
        w = np.cumsum(inc, axis=1)
        if self.d == int(self.d):
            chi = np.sqrt(np.sum(rng.standard_normal((count, int(self.d))) ** 2, axis=1))
        else:
            chi = np.sqrt(2.0 * rng.gamma(self.d / 2.0, size=count))
        return w * (math.sqrt(self.d) / chi)[:, None]

    def to_dict(self):
        return {"kind": "student", "d": self.d, "grid": self.grid}


def sample(model: MeasureModel, count: int, seed=None) -> np.ndarray:
    return model.sample(count, seed)


_NAMED = {
    "lebesgue-1d": lambda: LebesgueInterval(0.0, 1.0),
    "uniform-square": lambda: UniformBody(box_polytope([0.0, 0.0], [1.0, 1.0])),
    "uniform-disk": lambda: UniformBody(EuclideanGauge(1.0, 2)),
}


def _from_name(name: str) -> MeasureModel:
    if name in _NAMED:
        return _NAMED[name]()
    head, _, tail = name.rpartition("-")
    try:
        k = int(tail)
    except ValueError:
        raise ConstructionError(f"unknown model name {name!r}") from None
    if head == "gaussian":
        return Gaussian.standard(k)
    if head == "cauchy":
        return CauchyN(k)
    if head == "student":
        return StudentPath(k, 64)
    if head == "uniform-cube":
        return UniformBody(box_polytope(np.zeros(k), np.ones(k)))
    if head == "uniform-ball":
        return UniformBody(EuclideanGauge(1.0, k))
    raise ConstructionError(f"unknown model name {name!r}")


def make_model(descriptor, **params) -> MeasureModel:
    """Build a model from a name, a JSON string or a dict descriptor.

    Names: ``lebesgue-1d``, ``uniform-square``, ``uniform-disk``,
    ``uniform-cube-N``, ``uniform-ball-N``, ``gaussian-N``, ``cauchy-N``,
    ``student-D``.
    """
    if isinstance(descriptor, MeasureModel):
        return descriptor
    if isinstance(descriptor, str):
        text = descriptor.strip()
        if not text.startswith("{"):
            return _from_name(text)
        descriptor = json.loads(text)
    d = {**descriptor, **params}
    kind = d.get("kind")
    if kind == "cauchy":
        return CauchyN(int(d.get("dim", 1)))
    if kind == "gaussian":
        if "mean" in d:
            mean = d["mean"]
            cov = d.get("cov", np.eye(len(mean)).tolist())
            return Gaussian(mean, cov)
        return Gaussian.standard(int(d.get("dim", 1)))
    if kind == "student":
        return StudentPath(float(d.get("d", 1.0)), int(d.get("grid", 64)))
    if kind == "lebesgue":
        a, b = d.get("interval", [0.0, 1.0])
        return LebesgueInterval(a, b)
    if kind == "uniform":
        if "polytope" in d:
            return UniformBody(Polytope.from_rows(d["polytope"]))
        if "ball" in d:
            ball = d["ball"]
            return UniformBody(EuclideanGauge(float(ball.get("radius", 1.0)),
                                              int(ball.get("dim", 2)), ball.get("center")))
        if "box" in d:
            lo, hi = d["box"]
            return UniformBody(box_polytope(lo, hi))
        raise ConstructionError("uniform model needs a polytope, ball or box")
    raise ConstructionError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class LinearMap:
    """A surjective linear map R^n -> R^m given by an m x n matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        m, n = M.shape
        if m > n:
            raise ConstructionError("linear map needs m <= n")
        s = np.linalg.svd(M, compute_uv=False)
        if s.min() <= 1e-10 * max(s.max(), 1.0):
            raise ConstructionError("linear map must have full row rank")
        object.__setattr__(self, "matrix", M)

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, points):
        return np.asarray(points, dtype=float) @ self.matrix.T


# ---------------------------------------------------------- beta-concavity


@dataclass
class BetaConcavityReport:
    max_violation: float
    worst_triple: tuple | None
    passed: bool
    trials: int
    skipped: int
    tolerance: float

    def to_dict(self):
        worst = None
        if self.worst_triple is not None:
            x, y, t = self.worst_triple
            worst = {"x": np.asarray(x).tolist(), "y": np.asarray(y).tolist(), "t": float(t)}
        return {"max_violation": self.max_violation, "worst_triple": worst,
                "pass": self.passed, "trials": self.trials, "skipped": self.skipped,
                "tolerance": self.tolerance}


def check_beta_concavity(density, beta, domain_sampler, trials: int, seed=None,
                         rtol: float = 1e-9) -> BetaConcavityReport:
    """Test ``f((1-t)x + ty) >= M_beta(f(x), f(y); t)`` on random triples.

    ``domain_sampler(count, rng)`` supplies x and y. The violation of a
    triple is ``(M - f(mid)) / M``; pairs with a vanishing endpoint value
    are skipped.
    """
    beta = as_ext(beta)
    rng = _rng(seed)
    trials = int(trials)
    x = np.asarray(domain_sampler(trials, rng), dtype=float)
    y = np.asarray(domain_sampler(trials, rng), dtype=float)
    if x.ndim == 1:
        x, y = x[:, None], y[:, None]
    t = rng.random(trials)
    fx = np.asarray(density(x), dtype=float).reshape(-1)
    fy = np.asarray(density(y), dtype=float).reshape(-1)
    keep = (fx > 0) & (fy > 0)
    skipped = int(trials - keep.sum())
    if skipped > 0.9 * trials:
        raise BudgetError("insufficient positive pairs")
    x, y, t, fx, fy = x[keep], y[keep], t[keep], fx[keep], fy[keep]
    mid = (1.0 - t)[:, None] * x + t[:, None] * y
    fm = np.asarray(density(mid), dtype=float).reshape(-1)
    rhs = generalized_mean(fx, fy, t, beta)
    viol = np.where(rhs > 0, (rhs - fm) / np.where(rhs > 0, rhs, 1.0), 0.0)
    k = int(np.argmax(viol))
    worst = float(max(viol[k], 0.0))
    triple = (x[k], y[k], t[k]) if viol[k] > 0 else None
    return BetaConcavityReport(worst, triple, worst <= rtol, trials, skipped, rtol)


# ------------------------------------------------------------- projections


def _silverman_iqr_bandwidth(x):
    n = x.shape[0]
    q75, q25 = np.percentile(x, [75, 25])
    spread = (q75 - q25) / 1.349
    sd = np.std(x)
    scale = min(sd, spread) if spread > 0 else sd
    return 0.9 * scale * n ** (-0.2)


def kde_1d(x, bandwidth=None, grid_size: int = 4096, lo=None, hi=None):
    """Binned Gaussian kernel density estimate on a regular grid.

    Returns ``(grid, values, bandwidth)``; mass falling outside the grid
    still counts in the normalization.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    h = float(bandwidth) if bandwidth else _silverman_iqr_bandwidth(x)
    if lo is None:
        lo = np.quantile(x, 0.001) - 4 * h
    if hi is None:
        hi = np.quantile(x, 0.999) + 4 * h
    grid = np.linspace(lo, hi, grid_size)
    dx = grid[1] - grid[0]
    pos = (x - lo) / dx
    inside = (pos >= 0) & (pos < grid_size - 1)
    i = np.floor(pos[inside]).astype(int)
    frac = pos[inside] - i
    counts = np.bincount(i, 1 - frac, grid_size) + np.bincount(i + 1, frac, grid_size)
    half = int(math.ceil(5 * h / dx))
    kgrid = np.arange(-half, half + 1) * dx
    kernel = np.exp(-0.5 * (kgrid / h) ** 2) / (h * math.sqrt(2 * math.pi))
    values = signal.fftconvolve(counts, kernel, mode="same") / x.shape[0]
    return grid, np.maximum(values, 0.0), h


@dataclass
class ProjectionReport:
    image: np.ndarray
    bandwidth: float | None
    beta: object
    check: BetaConcavityReport | None
    check_range: tuple | None

    @property
    def passed(self):
        return self.check is not None and self.check.passed

    def to_dict(self):
        return {
            "bandwidth": self.bandwidth,
            "beta": as_ext(self.beta).to_json() if self.beta is not None else None,
            "check_range": list(self.check_range) if self.check_range else None,
            "check": self.check.to_dict() if self.check else None,
            "pass": self.passed,
        }


# relative standard error of the KDE allowed inside the checked range
_KDE_MAX_RELERR = 0.05


def project_model(model: MeasureModel, linear_map, count: int = 100_000, seed=None,
                  trials: int = 10_000, rtol: float | None = None,
                  alpha=None) -> ProjectionReport:
    """Push samples through a linear map and test the image's concavity.

    For a 1D image the density is estimated by a binned kernel smoother and
    checked at ``beta = beta_from_alpha(alpha, 1)`` on the part of the
    central 98% range where the smoother's relative standard error stays
    below 5%. The tolerance defaults to five times that error bound.
    """
    T = linear_map if isinstance(linear_map, LinearMap) else LinearMap(linear_map)
    m, n = T.shape
    if n != model.dim:
        raise DomainError("map and model dimensions differ")
    if m > 3:
        raise DomainError("image dimension above 3 is not supported")
    if count < 10_000:
        raise BudgetError("projection checks need at least 10^4 samples")
    rng = _rng(seed)
    image = T(model.sample(count, rng))
    if m > 1:
        return ProjectionReport(image, None, None, None, None)
    alpha = model.alpha_declared if alpha is None else as_alpha(alpha)
    beta = beta_from_alpha(alpha, 1)
    z = image[:, 0]
    q_lo, q_hi = np.quantile(z, [0.01, 0.99])
    grid, values, h = kde_1d(z)
    # R(K) = 1 / (2 sqrt(pi)) for the Gaussian kernel
    relerr = np.sqrt(1.0 / (2 * math.sqrt(math.pi)) / np.maximum(count * h * values, 1e-300))
    ok = (grid >= q_lo) & (grid <= q_hi) & (relerr <= _KDE_MAX_RELERR)
    if not ok.any():
        raise BudgetError("no grid region with reliable density estimate")
    lo, hi = grid[ok].min(), grid[ok].max()
    tol = 5 * _KDE_MAX_RELERR if rtol is None else rtol

    def density(p):
        return np.interp(np.asarray(p, dtype=float).reshape(-1), grid, values)

    def domain(k, r):
        return r.uniform(lo, hi, size=(k, 1))

    report = check_beta_concavity(density, beta, domain, trials, rng, rtol=tol)
    return ProjectionReport(image, h, beta, report, (float(lo), float(hi)))
