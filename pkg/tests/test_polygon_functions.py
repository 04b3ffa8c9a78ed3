import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from hypmeas import ConstructionError
from hypmeas.functions import (
    Affine,
    IndicatorBall,
    IndicatorHalfspace,
    parse_function,
)
from hypmeas.polygon import (
    chord_lengths,
    clip_halfplane,
    polygon_area,
    polygon_centroid,
    polygon_disk_area,
    polygon_from_polytope,
    polygon_moments,
    polygon_second_moments,
    regular_polygon,
)

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def mc_integral(f, P, n=400_000, seed=0):
    """Oracle: Monte Carlo integral over a polygon inside its bounding box."""
    rng = np.random.default_rng(seed)
    lo, hi = P.min(axis=0), P.max(axis=0)
    x = lo + (hi - lo) * rng.random((n, 2))
    inside = np.ones(n, bool)
    for p, q in zip(P, np.roll(P, -1, axis=0)):
        e = q - p
        inside &= e[0] * (x[:, 1] - p[1]) - e[1] * (x[:, 0] - p[0]) >= 0
    vals = np.where(inside, f(x), 0.0)
    box = np.prod(hi - lo)
    return box * vals.mean(), box * vals.std() / math.sqrt(n)


class TestMoments:
    def test_square(self):
        a, first, second = polygon_moments(SQUARE)
        assert a == pytest.approx(1.0)
        assert_allclose(first, [0.5, 0.5])
        assert_allclose(second, [1 / 3, 1 / 4, 1 / 3])
        assert_allclose(polygon_second_moments(SQUARE), [[1 / 12, 0], [0, 1 / 12]], atol=1e-15)

    def test_translation(self):
        far = SQUARE * 1e-4 + 1e4
        assert polygon_area(far) == pytest.approx(1e-8, rel=1e-6)
        assert_allclose(polygon_centroid(far), [1e4 + 5e-5] * 2, rtol=1e-14)

    def test_triangle_clip(self):
        tri = clip_halfplane(SQUARE, [1.0, 1.0], 1.0)
        assert polygon_area(tri) == pytest.approx(0.5)
        assert_allclose(polygon_centroid(tri), [1 / 3, 1 / 3])

    def test_clip_everything(self):
        assert clip_halfplane(SQUARE, [1.0, 0.0], -1.0).shape == (0, 2)
        assert polygon_area(clip_halfplane(SQUARE, [1.0, 0.0], 5.0)) == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1.5, 1.5))
    def test_clip_complements_add_up(self, w0, w1, c):
        if abs(w0) + abs(w1) < 1e-3:
            return
        w = np.array([w0, w1])
        keep = polygon_area(clip_halfplane(SQUARE, w, c))
        other = polygon_area(clip_halfplane(SQUARE, -w, -c))
        assert keep + other == pytest.approx(1.0, abs=1e-12)

    def test_from_polytope(self):
        P = polygon_from_polytope([[1, 0], [-1, 0], [0, 1], [0, -1]], [1, 0, 1, 0], [0.5, 0.5])
        assert polygon_area(P) == pytest.approx(1.0)


class TestDisk:
    def test_regular_polygon_area(self):
        assert polygon_area(regular_polygon(1.0, 4096)) == pytest.approx(math.pi, rel=1e-14)
        raw = polygon_area(regular_polygon(1.0, 6, preserve_area=False))
        assert raw == pytest.approx(1.5 * math.sqrt(3))

    @pytest.mark.parametrize("r, expected", [(0.5, math.pi / 16), (2.0, 1.0)])
    def test_disk_in_square(self, r, expected):
        assert polygon_disk_area(SQUARE, r, (0.0, 0.0)) == pytest.approx(expected, rel=1e-12)

    def test_disk_against_monte_carlo(self):
        est, se = mc_integral(lambda x: (np.linalg.norm(x - 0.3, axis=1) <= 0.6).astype(float),
                              SQUARE)
        assert abs(polygon_disk_area(SQUARE, 0.6, (0.3, 0.3)) - est) < 4 * se


class TestChords:
    def test_square_chords(self):
        assert_allclose(chord_lengths(SQUARE, [1.0, 0.0], [0.25, 0.5, 2.0]), [1.0, 1.0, 0.0])
        diag = chord_lengths(SQUARE, [1.0, 1.0], [math.sqrt(2) / 2])
        assert diag[0] == pytest.approx(math.sqrt(2))

    def test_chords_integrate_to_area(self):
        P = regular_polygon(1.0, 64)
        s = np.linspace(-1.1, 1.1, 20001)
        area = np.trapezoid(chord_lengths(P, [0.3, 0.7], s), s)
        assert area == pytest.approx(polygon_area(P), rel=1e-6)


class TestCatalog:
    @pytest.mark.parametrize("spec", ["const:2", "affine:0.5,1,-2",
                                      "indicator-ball:0.4", "indicator-halfspace:1,1,0.8",
                                      "shifted-indicator:ball:0.6,0.25",
                                      "shifted-indicator:halfspace-top,0.5"])
    def test_polygon_integral(self, spec):
        u = parse_function(spec, 2, center=np.array([0.5, 0.5]))
        est, se = mc_integral(u, SQUARE, seed=hash(spec) % 1000)
        assert abs(u.polygon_integral(SQUARE) - est) < 4 * se + 1e-12

    def test_named_halfspaces_split_at_center(self):
        c = np.array([0.5, 0.5])
        for name in ("halfspace-left", "halfspace-right", "halfspace-top", "halfspace-bottom"):
            u = parse_function(f"shifted-indicator:{name},0", 2, center=c)
            assert u.polygon_integral(SQUARE) == pytest.approx(0.5)
        left = parse_function("shifted-indicator:halfspace-left,0", 2, center=c)
        assert left([[0.2, 0.9]])[0] == 1.0

    def test_breakpoints(self):
        ball = IndicatorBall(1.0, np.zeros(2))
        assert_allclose(ball.segment_breakpoints([-2.0, 0.0], [2.0, 0.0]), [0.25, 0.75])
        half = IndicatorHalfspace([1.0, 0.0], 0.5)
        assert_allclose(half.segment_breakpoints([0.0, 0.0], [1.0, 0.0]), [0.5])
        assert half.segment_breakpoints([0.0, 0.0], [0.2, 0.0]) == []

    def test_vectorized(self):
        f = Affine(1.0, [2.0, 3.0])
        assert_allclose(f(np.array([[1.0, 1.0], [0.0, 0.0]])), [6.0, 1.0])
        assert_allclose(parse_function("norm")([[3.0, 4.0]]), [5.0])

    @pytest.mark.parametrize("bad", ["affine:1,2", "spline:3", "shifted-indicator:0.5",
                                     "shifted-indicator:blob,0.5", "const:x"])
    def test_parse_errors(self, bad):
        with pytest.raises((ConstructionError, ValueError)):
            parse_function(bad, 2)
