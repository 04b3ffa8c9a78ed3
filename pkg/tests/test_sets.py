import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from hypmeas import ConstructionError, DomainError
from hypmeas.sets import (
    Complement,
    EuclideanGauge,
    Generic,
    Interval,
    IntervalUnion,
    Polytope,
    SymmetricConvexGauge,
    Union,
    box_polytope,
    interval_polytope,
    set_from_dict,
    set_from_string,
)


def grid_fraction(s, x, y, n=200_001):
    """Oracle: fraction of a fine midpoint grid on [x, y] inside s."""
    t = (np.arange(n) + 0.5) / n
    pts = x + t[:, None] * (y - x)
    return float(np.mean(s.contains(pts)))


class TestPolytope:
    def test_square(self):
        sq = box_polytope([0, 0], [1, 1])
        assert_allclose(sq.interior_point, [0.5, 0.5], atol=1e-9)
        assert sq.inradius == pytest.approx(0.5)
        lo, hi = sq.bounding_box()
        assert_allclose(lo, [0, 0], atol=1e-12)
        assert_allclose(hi, [1, 1], atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ConstructionError):
            Polytope([[1.0], [-1.0]], [0.0, -1.0])

    def test_segment_measure(self):
        sq = box_polytope([0, 0], [1, 1])
        assert sq.line_measure(np.array([-1.0, 0.5]), np.array([1.0, 0.5])) == pytest.approx(0.5)
        assert sq.line_measure_many([[0.5, 0.5]], [[0.5, 0.5]])[0] == 1.0

    def test_ambient_checked(self):
        s = interval_polytope(0.2, 0.4).with_ambient(interval_polytope(0.0, 1.0))
        with pytest.raises(DomainError):
            s.line_measure(np.array([0.0]), np.array([2.0]))

    def test_add_halfspace(self):
        tri = box_polytope([0, 0], [1, 1]).add_halfspace([1, 1], 1.0)
        assert tri.contains([[0.2, 0.2]])[0] and not tri.contains([[0.8, 0.8]])[0]

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
    def test_segment_matches_grid(self, coords):
        sq = box_polytope([0, 0], [1, 1])
        x, y = np.array(coords[:2]), np.array(coords[2:])
        if np.allclose(x, y):
            return
        assert sq.line_measure_many(x, y)[0] == pytest.approx(grid_fraction(sq, x, y), abs=2e-5)


class TestGauges:
    def test_euclidean_chord(self):
        ball = EuclideanGauge(1.0, 2)
        got = ball.line_measure_many([[-2.0, 0.0]], [[2.0, 0.0]])[0]
        assert got == pytest.approx(0.5)

    def test_generic_gauge_matches_euclidean(self):
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=(50, 3)) * 2, rng.normal(size=(50, 3)) * 2
        generic = SymmetricConvexGauge(lambda p: np.linalg.norm(p, axis=-1), 3)
        assert_allclose(generic.line_measure_many(x, y),
                        EuclideanGauge(1.0, 3).line_measure_many(x, y), atol=1e-9)

    def test_l1_gauge_against_grid(self):
        diamond = SymmetricConvexGauge(lambda p: np.abs(p).sum(axis=-1), 2)
        x, y = np.array([-1.5, 0.3]), np.array([1.2, -0.1])
        assert diamond.line_measure_many(x, y)[0] == pytest.approx(
            grid_fraction(diamond, x, y), abs=2e-5)

    def test_non_homogeneous_rejected(self):
        with pytest.raises(ConstructionError):
            SymmetricConvexGauge(lambda p: np.linalg.norm(p, axis=-1) ** 2, 2)

    def test_scaled(self):
        assert EuclideanGauge(1.0, 2).scaled(3.0).radius == 3.0
        g = SymmetricConvexGauge(lambda p: np.abs(p).max(axis=-1), 2).scaled(2.0)
        assert g.contains([[1.9, -1.9]])[0] and not g.contains([[2.1, 0.0]])[0]

    def test_bad_radius(self):
        with pytest.raises(ConstructionError):
            EuclideanGauge(0.0, 2)


class TestIntervals:
    def test_normalize_merges(self):
        u = IntervalUnion([(0.0, 0.3), Interval(0.3, 0.5, False, True), (0.7, 0.8)])
        assert len(u) == 2 and u.measure == pytest.approx(0.6)

    def test_open_touching_not_merged(self):
        u = IntervalUnion([Interval(0, 0.3, True, False), Interval(0.3, 0.5, False, True)])
        assert len(u) == 2
        assert not u.contains([0.3])[0]

    def test_complement_flags(self):
        u = IntervalUnion([Interval(0.2, 0.4, True, False)])
        c = u.complement(0.0, 1.0)
        assert [(iv.lo, iv.hi, iv.lo_closed, iv.hi_closed) for iv in c] == [
            (0.0, 0.2, True, False), (0.4, 1.0, True, True)]

    def test_complement_twice(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            cuts = np.sort(rng.random(6))
            flags = rng.random((3, 2)) < 0.5
            u = IntervalUnion([Interval(lo, hi, bool(a), bool(b))
                               for (lo, hi), (a, b) in zip(cuts.reshape(3, 2), flags)])
            assert u.complement(0, 1).complement(0, 1).is_close(u, tol=0.0) or u.intervals[0].lo == 0

    def test_degenerate_must_be_closed(self):
        with pytest.raises(ConstructionError):
            Interval(0.5, 0.5, True, False)

    def test_segment_measure(self):
        u = IntervalUnion([(0.0, 0.1), (0.5, 0.6)])
        assert u.line_measure(np.array([0.0]), np.array([1.0])) == pytest.approx(0.2)
        assert u.line_measure(np.array([0.55]), np.array([0.55])) == 1.0


class TestCombinators:
    def test_complement_measure(self):
        c = Complement(EuclideanGauge(1.0, 2))
        assert c.line_measure_many([[-2.0, 0.0]], [[2.0, 0.0]])[0] == pytest.approx(0.5)

    def test_union_of_disjoint(self):
        u = Union([EuclideanGauge(0.5, 2, [-1, 0]), EuclideanGauge(0.5, 2, [1, 0])])
        assert u.line_measure_many([[-2.0, 0.0]], [[2.0, 0.0]])[0] == pytest.approx(0.5)

    def test_generic_grid(self):
        disk = Generic(lambda p: np.linalg.norm(p, axis=1) < 1.0, 2, grid=4000)
        assert disk.line_measure_many([[-2.0, 0.0]], [[2.0, 0.0]])[0] == pytest.approx(0.5, abs=1e-3)


class TestDescriptors:
    def test_strings(self):
        assert isinstance(set_from_string("ball:2", 3), EuclideanGauge)
        c = set_from_string("not-ball:1", 2)
        assert isinstance(c, Complement) and c.inner.radius == 1.0
        iv = set_from_string("intervals:[[0, 0.1], [0.5, 0.6]]")
        assert iv.measure == pytest.approx(0.2)
        p = set_from_string("polytope:[[1, 0, 1], [-1, 0, 0], [0, 1, 1], [0, -1, 0]]")
        assert p.contains([[0.5, 0.5]])[0]

    def test_dict_round_trip(self):
        u = IntervalUnion([Interval(0.1, 0.2, False, True)])
        back = set_from_dict(u.to_dict())
        assert back.is_close(u, tol=0.0)
        ball = set_from_dict(EuclideanGauge(2.0, 3).to_dict())
        assert ball.radius == 2.0 and ball.dim == 3

    def test_unknown(self):
        with pytest.raises(ConstructionError):
            set_from_string("blob:1")
