import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevmap.errors import DegenerateInputError
from bevmap.geom import (
    Point2,
    PolarSegment,
    Pose2,
    Segment2,
    axial_angle_diff,
    point_to_line_distance,
    polar_to_segment,
    segment_to_polar,
    transform_polar,
    transform_segment,
)

coord = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)
angle = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


def seg(x1, y1, x2, y2):
    return Segment2(Point2(x1, y1), Point2(x2, y2))


class TestSegmentToPolar:
    def test_horizontal_line(self):
        p = segment_to_polar(seg(0, 1, 2, 1))
        assert p.rho == pytest.approx(1.0)
        assert p.alpha == pytest.approx(math.pi / 2)
        assert p.d1 == pytest.approx(-2.0)
        assert p.d2 == pytest.approx(0.0)
        assert p.length == pytest.approx(2.0)

    def test_vertical_line(self):
        p = segment_to_polar(seg(1, 0, 1, 3))
        assert p.rho == pytest.approx(1.0)
        assert p.alpha == pytest.approx(0.0)
        assert (p.d1, p.d2) == (pytest.approx(0.0), pytest.approx(3.0))

    def test_zero_length_raises(self):
        with pytest.raises(DegenerateInputError):
            segment_to_polar(seg(1, 1, 1, 1))

    def test_length_matches_extent(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x1, y1, x2, y2 = rng.uniform(-20, 20, 4)
            if math.hypot(x2 - x1, y2 - y1) < 1e-9:
                continue
            s = seg(x1, y1, x2, y2)
            p = segment_to_polar(s)
            assert abs(p.length - s.length) < 1e-9

    def test_roundtrip_fuzzed(self):
        # Oracle: direct endpoint reconstruction from the polar invariant.
        rng = np.random.default_rng(42)
        for _ in range(1000):
            x1, y1, x2, y2 = rng.uniform(-40, 40, 4)
            if math.hypot(x2 - x1, y2 - y1) < 1e-6:
                continue
            s = seg(x1, y1, x2, y2)
            r = polar_to_segment(segment_to_polar(s))
            direct = min(
                math.hypot(r.p1.x - x1, r.p1.y - y1) + math.hypot(r.p2.x - x2, r.p2.y - y2),
                math.hypot(r.p1.x - x2, r.p1.y - y2) + math.hypot(r.p2.x - x1, r.p2.y - y1),
            )
            assert direct < 1e-9

    def test_normal_points_away_from_origin(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            x1, y1, x2, y2 = rng.uniform(-30, 30, 4)
            if math.hypot(x2 - x1, y2 - y1) < 1e-6:
                continue
            p = segment_to_polar(seg(x1, y1, x2, y2))
            if p.rho > 0:
                # Signed distance of origin-to-line equals +rho under n.
                nx, ny = p.normal()
                assert (x1 * nx + y1 * ny) == pytest.approx(p.rho, abs=1e-9)


class TestPolarToSegment:
    def test_axis_aligned(self):
        s = polar_to_segment(PolarSegment(1.0, math.pi / 2, -2.0, 0.0))
        assert (s.p1.x, s.p1.y) == (pytest.approx(2.0), pytest.approx(1.0))
        assert (s.p2.x, s.p2.y) == (pytest.approx(0.0, abs=1e-12), pytest.approx(1.0))

    def test_line_through_origin(self):
        s = polar_to_segment(PolarSegment(0.0, 0.0, -1.0, 1.0))
        assert (s.p1.x, s.p1.y) == (pytest.approx(0.0), pytest.approx(-1.0))
        assert (s.p2.x, s.p2.y) == (pytest.approx(0.0), pytest.approx(1.0))

    def test_d_order_validated(self):
        with pytest.raises(DegenerateInputError):
            PolarSegment(1.0, 0.0, 2.0, 1.0)


class TestAxialAngleDiff:
    @pytest.mark.parametrize(
        "a,b,expected",
        [
            (0.0, math.pi, 0.0),
            (0.1, math.pi - 0.1, 0.2),
            (math.pi / 4, 3 * math.pi / 4, math.pi / 2),
            (0.0, 0.0, 0.0),
            (0.3, 0.3 + 5 * math.pi, 0.0),
        ],
    )
    def test_table(self, a, b, expected):
        assert axial_angle_diff(a, b) == pytest.approx(expected, abs=1e-12)

    @given(angle, angle)
    def test_symmetric_and_bounded(self, a, b):
        d = axial_angle_diff(a, b)
        assert d == pytest.approx(axial_angle_diff(b, a), abs=1e-12)
        assert 0.0 <= d <= math.pi / 2 + 1e-12


class TestTransform:
    def test_identity(self):
        s = seg(1, 2, 3, 4)
        r = transform_segment(s, Pose2())
        assert (r.p1.x, r.p1.y, r.p2.x, r.p2.y) == (1, 2, 3, 4)

    def test_quarter_turn(self):
        r = transform_segment(seg(1, 0, 2, 0), Pose2(0, 0, math.pi / 2))
        assert r.p1.x == pytest.approx(0.0, abs=1e-12)
        assert r.p1.y == pytest.approx(1.0)
        assert r.p2.x == pytest.approx(0.0, abs=1e-12)
        assert r.p2.y == pytest.approx(2.0)

    @settings(max_examples=200)
    @given(coord, coord, angle, coord, coord, coord, coord)
    def test_inverse_roundtrip(self, px, py, pt, x1, y1, x2, y2):
        pose = Pose2(px, py, pt)
        s = seg(x1, y1, x2, y2)
        r = transform_segment(transform_segment(s, pose), pose.inverse())
        assert abs(r.p1.x - x1) < 1e-12 * max(1.0, abs(x1)) + 1e-10
        assert abs(r.p1.y - y1) < 1e-12 * max(1.0, abs(y1)) + 1e-10
        assert abs(r.p2.x - x2) < 1e-12 * max(1.0, abs(x2)) + 1e-10
        assert abs(r.p2.y - y2) < 1e-12 * max(1.0, abs(y2)) + 1e-10

    def test_lengths_preserved(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            x1, y1, x2, y2, px, py, pt = rng.uniform(-10, 10, 7)
            s = seg(x1, y1, x2, y2)
            if s.length < 1e-6:
                continue
            r = transform_segment(s, Pose2(px, py, pt))
            assert abs(r.length - s.length) < 1e-12 * max(1.0, s.length) + 1e-12

    def test_polar_extent_preserved(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            x1, y1, x2, y2, px, py, pt = rng.uniform(-10, 10, 7)
            s = seg(x1, y1, x2, y2)
            if s.length < 1e-6:
                continue
            a = segment_to_polar(s)
            b = transform_polar(a, Pose2(px, py, pt))
            assert abs(a.length - b.length) < 1e-10


def test_point_to_line_distance():
    line = segment_to_polar(seg(0, 1, 5, 1))
    assert point_to_line_distance(Point2(2, 3), line) == pytest.approx(2.0)
    assert point_to_line_distance(Point2(2, 1), line) == pytest.approx(0.0, abs=1e-12)
