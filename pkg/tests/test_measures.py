import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from hypmeas import BudgetError, ConstructionError, DomainError, beta_from_alpha
from hypmeas.measures import (
    CauchyN,
    Gaussian,
    LebesgueInterval,
    LinearMap,
    StudentPath,
    UniformBody,
    check_beta_concavity,
    kde_1d,
    make_model,
    project_model,
    sample,
)
from hypmeas.sets import box_polytope


def cauchy_density_oracle(x):
    """Closed form c_n (1 + |x|^2)^(-(n+1)/2)."""
    x = np.atleast_2d(x)
    n = x.shape[1]
    c = math.gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)
    return c * (1 + np.sum(x * x, axis=1)) ** (-(n + 1) / 2)


def grid_box_masses(density, lo, hi, bins=(4, 5), fine=120):
    """Midpoint-rule masses of a bins[0] x bins[1] grid of rectangles."""
    ex = np.linspace(lo[0], hi[0], bins[0] + 1)
    ey = np.linspace(lo[1], hi[1], bins[1] + 1)
    out = np.empty(bins)
    for i in range(bins[0]):
        for j in range(bins[1]):
            sx = ex[i] + (np.arange(fine) + 0.5) / fine * (ex[i + 1] - ex[i])
            sy = ey[j] + (np.arange(fine) + 0.5) / fine * (ey[j + 1] - ey[j])
            X, Y = np.meshgrid(sx, sy)
            vals = density(np.column_stack([X.ravel(), Y.ravel()]))
            out[i, j] = vals.mean() * (ex[i + 1] - ex[i]) * (ey[j + 1] - ey[j])
    return out, ex, ey


class TestModels:
    def test_cauchy_density(self):
        assert CauchyN(1).density([[0.0]])[0] == pytest.approx(1 / math.pi)
        rng = np.random.default_rng(0)
        for n in (1, 2, 3, 5):
            x = rng.standard_cauchy((20, n))
            assert_allclose(CauchyN(n).density(x), cauchy_density_oracle(x), rtol=1e-12)

    def test_gaussian_density(self):
        assert Gaussian.standard(2).density([[0.0, 0.0]])[0] == pytest.approx(1 / (2 * math.pi))
        g = Gaussian([1.0, -1.0], [[2.0, 0.5], [0.5, 1.0]])
        x = np.random.default_rng(1).normal(size=(10, 2))
        ref = stats.multivariate_normal([1.0, -1.0], [[2.0, 0.5], [0.5, 1.0]]).pdf(x)
        assert_allclose(g.density(x), ref, rtol=1e-12)

    def test_uniform_square(self):
        m = make_model("uniform-square")
        assert m.alpha_declared.value == pytest.approx(0.5)
        assert_allclose(m.density([[0.5, 0.5], [0.1, 0.9]]), 1.0)
        assert m.density([[1.5, 0.5]])[0] == 0.0

    @pytest.mark.parametrize("name, alpha", [("uniform-cube-3", 1 / 3), ("gaussian-4", 0.0),
                                             ("cauchy-2", -1.0), ("student-4", -0.25),
                                             ("lebesgue-1d", 1.0), ("uniform-ball-3", 1 / 3)])
    def test_declared_alpha(self, name, alpha):
        assert make_model(name).alpha_declared.value == pytest.approx(alpha)

    def test_descriptors(self):
        assert isinstance(make_model('{"kind": "cauchy", "dim": 3}'), CauchyN)
        m = make_model({"kind": "uniform", "box": [[0, 0], [2, 1]]})
        assert m.density([[1.0, 0.5]])[0] == pytest.approx(0.5)
        ball = make_model({"kind": "uniform", "ball": {"radius": 2.0, "dim": 2}})
        assert ball.density([[0.0, 0.0]])[0] == pytest.approx(1 / (4 * math.pi))
        assert isinstance(make_model({"kind": "lebesgue", "interval": [0, 2]}), LebesgueInterval)
        with pytest.raises(ConstructionError):
            make_model("hyperbolic-7")
        with pytest.raises(ConstructionError):
            make_model({"kind": "uniform"})

    @pytest.mark.parametrize("name", ["uniform-square", "uniform-disk", "gaussian-2", "cauchy-3"])
    def test_density_integrates_to_one(self, name):
        # importance sampling against a wide Student proposal
        m = make_model(name)
        rng = np.random.default_rng(7)
        prop = stats.multivariate_t(np.zeros(m.dim), np.eye(m.dim), df=1.5)
        x = prop.rvs(200_000, random_state=rng).reshape(-1, m.dim)
        w = m.density(x) / prop.pdf(x)
        assert abs(w.mean() - 1.0) < 4 * w.std() / math.sqrt(w.size) + 1e-3


class TestSampling:
    def test_gaussian_variance(self):
        x = sample(Gaussian.standard(1), 100_000, seed=0)
        assert abs(x.var() - 1.0) < 0.02

    def test_reproducible(self):
        m = make_model("uniform-disk")
        assert_allclose(m.sample(50, seed=3), m.sample(50, seed=3))

    def test_student_path_endpoint_is_cauchy(self):
        x = StudentPath(1, 64).sample(100_000, seed=4)
        assert x.shape == (100_000, 64)
        assert stats.kstest(x[:, -1], "cauchy").statistic < 0.02

    def test_student_fractional_d(self):
        x = StudentPath(2.5, 8).sample(50_000, seed=5)[:, -1]
        assert stats.kstest(x, stats.t(2.5).cdf).statistic < 0.02

    @pytest.mark.parametrize("name, lo, hi", [("uniform-disk", (-1, -1), (1, 1)),
                                              ("gaussian-2", (-2, -2), (2, 2)),
                                              ("cauchy-2", (-3, -3), (3, 3)),
                                              ("uniform-square", (0, 0), (1, 1))])
    def test_histogram_matches_density(self, name, lo, hi):
        m = make_model(name)
        n = 100_000
        x = m.sample(n, seed=11)
        masses, ex, ey = grid_box_masses(m.density, lo, hi)
        counts, _, _ = np.histogram2d(x[:, 0], x[:, 1], bins=[ex, ey])
        observed = np.append(counts.ravel(), n - counts.sum())
        expected = np.append(masses.ravel(), max(1.0 - masses.sum(), 0.0)) * n
        keep = expected > 5
        observed, expected = observed[keep], expected[keep]
        expected *= observed.sum() / expected.sum()
        assert stats.chisquare(observed, expected).pvalue > 1e-4

    def test_hit_and_run_cube(self):
        x = make_model("uniform-cube-5").sample(20_000, seed=6)
        assert np.all((x >= 0) & (x <= 1))
        assert_allclose(x.mean(axis=0), 0.5, atol=0.02)
        assert_allclose(x.var(axis=0), 1 / 12, atol=0.01)

    def test_uniform_triangle_rejection(self):
        tri = UniformBody(box_polytope([0, 0], [1, 1]).add_halfspace([1, 1], 1.0))
        x = tri.sample(50_000, seed=8)
        assert_allclose(x.mean(axis=0), [1 / 3, 1 / 3], atol=0.01)


class TestBetaConcavity:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_cauchy(self, n):
        m = CauchyN(n)
        rep = check_beta_concavity(m.density, -1 / (n + 1), lambda k, r: m.sample(k, r),
                                   5000, seed=n)
        assert rep.passed

    def test_gaussian_log_concave(self):
        m = Gaussian.standard(2)
        assert check_beta_concavity(m.density, 0.0, lambda k, r: 3 * r.normal(size=(k, 2)),
                                    5000, seed=1).passed

    def test_bimodal_fails(self):
        f = lambda x: np.exp(-x[:, 0] ** 2) + np.exp(-(x[:, 0] - 10) ** 2)  # noqa: E731
        rep = check_beta_concavity(f, 0.0, lambda k, r: r.uniform(-1, 11, (k, 1)), 5000, seed=2)
        assert not rep.passed and rep.max_violation > 0.1
        assert rep.to_dict()["worst_triple"] is not None

    def test_insufficient_pairs(self):
        sq = make_model("uniform-square")
        with pytest.raises(BudgetError):
            check_beta_concavity(sq.density, "inf", lambda k, r: r.uniform(5, 6, (k, 2)),
                                 100, seed=0)


class TestProjection:
    def test_kde_normalized(self):
        x = np.random.default_rng(0).normal(size=50_000)
        grid, vals, h = kde_1d(x)
        assert np.trapezoid(vals, grid) == pytest.approx(1.0, abs=2e-3)
        exact = stats.gaussian_kde(x, bw_method=h / x.std(ddof=1))
        pts = np.linspace(-2, 2, 9)
        assert_allclose(np.interp(pts, grid, vals), exact(pts), rtol=1e-5)

    def test_cauchy_marginal(self):
        rep = project_model(CauchyN(3), [[1.0, 0.0, 0.0]], count=100_000, seed=1, alpha=-1.0)
        assert float(rep.beta) == pytest.approx(-0.5)
        assert rep.passed

    def test_square_diagonal(self):
        T = np.array([[1.0, 1.0]]) / math.sqrt(2)
        rep = project_model(make_model("uniform-square"), T, count=100_000, seed=2)
        assert rep.beta == beta_from_alpha(0.5, 1)
        assert rep.passed

    @pytest.mark.parametrize("name", ["gaussian-3", "uniform-disk", "cauchy-2"])
    def test_random_directions(self, name):
        m = make_model(name)
        rng = np.random.default_rng(3)
        for _ in range(20):
            w = rng.normal(size=(1, m.dim))
            assert project_model(m, w / np.linalg.norm(w), count=20_000, seed=rng,
                                 trials=2000).passed

    def test_bimodal_image_fails(self):
        class Mixture(Gaussian):
            def sample(self, count, seed=None):
                x = super().sample(count, seed)
                x[::2, 0] += 8.0
                return x

        rep = project_model(Mixture.standard(2), [[1.0, 0.0]], count=100_000, seed=4, alpha=0.0)
        assert not rep.passed

    def test_guards(self):
        with pytest.raises(ConstructionError):
            LinearMap([[1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(DomainError):
            project_model(Gaussian.standard(2), [[1.0, 0.0, 0.0]])
        with pytest.raises(BudgetError):
            project_model(Gaussian.standard(2), [[1.0, 0.0]], count=100)
        img = project_model(Gaussian.standard(3), np.eye(3)[:2], count=10_000, seed=0)
        assert img.image.shape == (10_000, 2) and img.check is None
