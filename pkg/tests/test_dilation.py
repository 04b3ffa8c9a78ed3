import numpy as np
import pytest
from numpy.testing import assert_allclose

from hypmeas import BudgetError, DomainError
from hypmeas.dilation import (
    DilationResult,
    contract_intervals_1d,
    dilate_intervals_1d,
    dilate_symmetric_complement,
    estimate_dilated_measure,
)
from hypmeas.measures import make_model
from hypmeas.sets import EuclideanGauge, Interval, IntervalUnion, box_polytope


def best_fraction(s, x, ys):
    """Oracle: max over candidate y of the share of [x, y] inside s."""
    xs = np.full((ys.size, 1), x)
    return float(np.max(s.line_measure_many(xs, ys[:, None])))


def worst_fraction(s, x, ys):
    xs = np.full((ys.size, 1), x)
    return float(np.min(s.line_measure_many(xs, ys[:, None])))


def candidates(s):
    ends = [e for iv in s for e in (iv.lo, iv.hi)]
    return np.unique(np.concatenate([np.linspace(0, 1, 2001), ends, [0.0, 1.0]]))


class TestExactLine:
    @pytest.mark.parametrize("seed", range(6))
    def test_dilation_matches_definition(self, seed):
        rng = np.random.default_rng(seed)
        cuts = np.sort(rng.random(6))
        B = IntervalUnion(cuts.reshape(3, 2))
        delta = float(rng.uniform(0.1, 0.9))
        D = dilate_intervals_1d(B, (0, 1), delta)
        ys = candidates(B)
        for x in rng.random(300):
            if min(abs(x - iv.lo) for iv in D) < 1e-3 or min(abs(x - iv.hi) for iv in D) < 1e-3:
                continue
            inside = B.contains([x])[0] or best_fraction(B, x, ys) > delta
            assert D.contains([x])[0] == inside

    @pytest.mark.parametrize("seed", range(6))
    def test_contraction_matches_definition(self, seed):
        rng = np.random.default_rng(100 + seed)
        A = IntervalUnion(np.sort(rng.random(6)).reshape(3, 2))
        delta = float(rng.uniform(0.1, 0.9))
        C = contract_intervals_1d(A, (0, 1), delta)
        ys = candidates(A)
        for x in rng.random(300):
            near = [abs(x - e) for iv in list(C) + list(A) for e in (iv.lo, iv.hi)]
            if near and min(near) < 1e-3:
                continue
            inside = A.contains([x])[0] and worst_fraction(A, x, ys) >= 1 - delta
            assert C.contains([x])[0] == inside

    def test_equality_case(self):
        D = dilate_intervals_1d(IntervalUnion([(0.0, 0.1)]), (0, 1), 0.2)
        assert D.measure == pytest.approx(0.5, abs=1e-12)
        # the threshold point itself is excluded (strict inequality)
        assert not D.intervals[-1].hi_closed

    def test_delta_zero_fills_line(self):
        D = dilate_intervals_1d(IntervalUnion([(0.4, 0.5)]), (0, 1), 0.0)
        assert D.measure == pytest.approx(1.0)

    def test_contraction_of_line_complement_is_scaled(self):
        # A = F minus (-1, 1); contraction keeps |x| >= 2/delta - 1
        A = IntervalUnion([(-50.0, -1.0), (1.0, 50.0)])
        C = contract_intervals_1d(A, (-50, 50), 0.5)
        assert_allclose([C.intervals[0].hi, C.intervals[1].lo], [-3.0, 3.0], atol=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            dilate_intervals_1d(IntervalUnion([(0.0, 0.1)]), (0, 1), 1.0)
        with pytest.raises(DomainError):
            dilate_intervals_1d(IntervalUnion([(0.0, 2.0)]), (0, 1), 0.5)

    def test_closed_flags_preserved(self):
        B = IntervalUnion([Interval(0.4, 0.6, False, False)])
        D = dilate_intervals_1d(B, (0, 1), 0.5)
        # x left of B needs 0.2 / (0.6 - x) > 0.5, so D = (0.2, 0.8)
        assert D.measure == pytest.approx(0.6)
        assert not D.contains([0.2])[0] and D.contains([0.2 + 1e-9])[0]


class TestGaugeComplement:
    def test_scale(self):
        res = dilate_symmetric_complement(EuclideanGauge(1.0, 2), 0.5)
        assert res.scale == pytest.approx(3.0)
        assert res.contains([[3.5, 0.0]])[0] and not res.contains([[2.5, 0.0]])[0]
        assert dilate_symmetric_complement(EuclideanGauge(1.0, 2), 1.0).scale == 1.0

    def test_worst_segment_through_scaled_boundary(self):
        # from |x| = 3, the segment to -x/3 spends exactly half its length in the ball
        res = dilate_symmetric_complement(EuclideanGauge(1.0, 2), 0.5)
        x = np.array([[res.scale, 0.0]])
        frac = EuclideanGauge(1.0, 2).line_measure_many(x, [[-1.0, 0.0]])[0]
        assert frac == pytest.approx(0.5)

    def test_delta_zero_rejected(self):
        with pytest.raises(DomainError):
            dilate_symmetric_complement(EuclideanGauge(1.0, 2), 0.0)


class TestMonteCarlo:
    def test_close_to_exact_on_line(self):
        model = make_model("lebesgue-1d")
        B = IntervalUnion([(0.2, 0.3), (0.6, 0.65)])
        exact = dilate_intervals_1d(B, (0, 1), 0.3).measure
        res = estimate_dilated_measure(model, B, 0.3, samples=20_000, seed=1)
        assert res.kind == "monte_carlo"
        assert res.value <= exact + 4 * res.std_error
        assert res.value >= exact - 0.01

    def test_square_ball_lower_bound(self):
        model = make_model("uniform-square")
        B = EuclideanGauge(0.2, 2, [0.5, 0.5])
        res = estimate_dilated_measure(model, B, 0.5, samples=20_000, seed=2)
        mu_b = np.pi * 0.04
        assert res.metadata["mu_B_hat"] == pytest.approx(mu_b, abs=0.01)
        assert mu_b <= res.value <= 1.0

    def test_reproducible_and_threaded(self):
        model = make_model("cauchy-2")
        B = EuclideanGauge(1.0, 2)
        a = estimate_dilated_measure(model, B, 0.5, samples=5000, seed=9)
        b = estimate_dilated_measure(model, B, 0.5, samples=5000, seed=9, workers=3)
        assert a.value == b.value
        assert_allclose(a.scores, b.scores)

    def test_nested_in_delta(self):
        model = make_model("uniform-square")
        B = box_polytope([0.0, 0.0], [0.3, 0.3])
        vals = [estimate_dilated_measure(model, B, d, samples=5000, seed=4).value
                for d in (0.2, 0.4, 0.6)]
        assert vals[0] >= vals[1] >= vals[2]

    def test_budget(self):
        model = make_model("uniform-square")
        B = EuclideanGauge(0.2, 2)
        with pytest.raises(BudgetError):
            estimate_dilated_measure(model, B, 0.5, directions=2)
        with pytest.raises(BudgetError):
            estimate_dilated_measure(model, B, 0.5, samples=10)

    def test_result_serializes(self):
        d = DilationResult("monte_carlo", value=0.5, std_error=0.01, sample_count=10).to_dict()
        assert d["value"] == 0.5 and d["kind"] == "monte_carlo"
