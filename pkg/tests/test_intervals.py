import math

import numpy as np
import pytest

from ciskit.intervals import (
    Box,
    BoxUnion,
    DomainError,
    Interval,
    IntervalMatrix,
    box_difference,
    interval_matrix_times_box,
)
from conftest import random_box


class TestInterval:
    def test_arithmetic(self):
        a, b = Interval(1, 2), Interval(-1, 3)
        assert (a + b).lo == 0 and (a + b).hi == 5
        assert (a - b).lo == -2 and (a - b).hi == 3
        assert (a * b).lo == -2 and (a * b).hi == 6
        assert (2 * a).lo == 2 and (2 * a).hi == 4
        assert (a / Interval(2, 4)).lo == 0.25 and (a / Interval(2, 4)).hi == 1.0

    def test_division_by_zero_interval(self):
        with pytest.raises(DomainError):
            Interval(1, 2) / Interval(-1, 1)

    def test_even_power_drops_sign(self):
        p = Interval(-1, 2) ** 2
        assert p.lo == 0 and p.hi == 4

    def test_negative_power(self):
        p = Interval(2, 4) ** -1
        assert p.lo == 0.25 and p.hi == 0.5

    def test_sin_exact_quarter_period(self):
        s = Interval(0, math.pi / 2).sin()
        assert s.lo == 0.0 and s.hi == 1.0

    def test_cos_critical_point_inside(self):
        c = Interval(-0.1, 0.1).cos()
        assert c.hi == 1.0
        assert c.lo <= math.cos(0.1) <= c.lo + 1e-11

    def test_tan_pole_rejected(self):
        with pytest.raises(DomainError):
            Interval(1.0, 2.0).tan()

    def test_log_sqrt_domains(self):
        with pytest.raises(DomainError):
            Interval(-1, 1).log()
        with pytest.raises(DomainError):
            Interval(-1, 1).sqrt()
        s = Interval(4, 9).sqrt()
        assert abs(s.lo - 2) < 1e-11 and abs(s.hi - 3) < 1e-11


class TestBox:
    def test_width_inf_norm(self):
        assert Box([0, 0], [1, 2]).width() == 2.0
        assert Box([0.3], [0.3]).width() == 0.0
        # region-of-interest dimensions from the pendulum study
        assert Box([-0.05, -0.01], [0.05, 0.01]).width() == pytest.approx(0.1)

    def test_midpoint(self):
        assert Box([0], [2]).midpoint()[0] == 1.0
        assert np.allclose(Box([-1, 3], [1, 5]).midpoint(), [0, 4])
        assert Box([0.1], [0.2]).midpoint()[0] == pytest.approx(0.15)

    def test_bisect_widest_dim(self):
        l, r = Box([0, 0], [2, 1]).bisect()
        assert l.same_as(Box([0, 0], [1, 1])) and r.same_as(Box([1, 0], [2, 1]))

    def test_bisect_1d(self):
        l, r = Box([0], [1]).bisect()
        assert l.same_as(Box([0], [0.5])) and r.same_as(Box([0.5], [1]))

    def test_bisect_tie_breaks_lowest_index(self):
        l, r = Box([0, 0], [1, 1]).bisect()
        assert l.same_as(Box([0, 0], [0.5, 1])) and r.same_as(Box([0.5, 0], [1, 1]))

    def test_bisect_zero_width_errors(self):
        with pytest.raises(ValueError):
            Box([1, 1], [1, 1]).bisect()

    def test_bisect_volume_conservation(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            b = random_box(rng, int(rng.integers(1, 4)))
            l, r = b.bisect()
            assert abs(l.volume() + r.volume() - b.volume()) <= 1e-12 * max(b.volume(), 1.0)

    def test_intersection(self):
        got = Box([0, 0], [1, 1]).intersection(Box([0.5, 0.5], [2, 2]))
        assert got.same_as(Box([0.5, 0.5], [1, 1]))
        assert Box([0], [1]).intersection(Box([2], [3])) is None
        assert Box([0, 0], [1, 1]).contains_point([0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            Box([0], [1]).intersects(Box([0, 0], [1, 1]))

    def test_json_roundtrip(self):
        b = Box([-0.05, -0.01], [0.05, 0.01])
        assert Box.from_json(b.to_json()).same_as(b)


class TestSubtract:
    def test_1d(self):
        u = BoxUnion([Box([0], [2])])
        assert u.subtract(Box([0], [1]))
        assert len(u) == 1 and u.boxes[0].same_as(Box([1], [2]))

    def test_full_removal(self):
        u = BoxUnion([Box([0, 0], [1, 1])])
        u.subtract(Box([0, 0], [1, 1]))
        assert u.is_empty()

    def test_center_hole_area(self):
        # [0,3]^2 minus [1,2]^2: 4 pieces of total area 9 - 1 = 8
        u = BoxUnion([Box([0, 0], [3, 3])])
        u.subtract(Box([1, 1], [2, 2]))
        assert len(u) == 4
        assert u.volume() == pytest.approx(8.0, abs=1e-12)

    def test_version_bumps_only_on_change(self):
        u = BoxUnion([Box([0], [1])])
        v0 = u.version
        assert not u.subtract(Box([5], [6]))
        assert u.version == v0
        assert u.subtract(Box([0.2], [0.4]))
        assert u.version == v0 + 1

    def test_monte_carlo_membership(self):
        rng = np.random.default_rng(3)
        u = BoxUnion([Box([0, 0], [2, 2]), Box([1.5, 1.0], [3.0, 2.5])])
        orig = u.copy()
        b = Box([0.7, 0.4], [2.2, 1.8])
        u.subtract(b)
        pts = rng.uniform([0, 0], [3, 3], size=(10_000, 2))
        for p in pts:
            expect = orig.contains_point(p) and not b.contains_point(p, tol=-1e-12)
            got = u.contains_point(p)
            if b.contains_point(p, tol=1e-9) and not b.contains_point(p, tol=-1e-9):
                continue  # boundary of the removed box: closure may keep it
            assert got == expect, p
        # pieces never poke into the removed interior
        for piece in u:
            inner = piece.intersection(b)
            if inner is not None:
                assert inner.volume() == 0.0

    def test_disjoint_pieces_volume(self):
        u = BoxUnion([Box([0, 0], [2, 2]), Box([1, 1], [3, 3])])
        # overlap handled exactly: 4 + 4 - 1
        assert u.volume() == pytest.approx(7.0, abs=1e-12)


class TestErode:
    def test_single_box_exact(self):
        u = BoxUnion([Box([0, 0], [1, 1])])
        u.erode(0.1)
        assert len(u) == 1 and u.boxes[0].same_as(Box([0.1, 0.1], [0.9, 0.9]))

    def test_vanishing(self):
        u = BoxUnion([Box([0], [1])])
        u.erode(0.6)
        assert u.is_empty()

    def test_overlapping_union_matches_merged_interval(self):
        # {[0,2],[1,3]} eroded by 0.25 equals [0.25, 2.75] as a point set
        u = BoxUnion([Box([0], [2]), Box([1], [3])])
        u.erode(0.25)
        assert u.volume() == pytest.approx(2.5, abs=1e-12)
        rng = np.random.default_rng(11)
        for x in rng.uniform(-0.5, 3.5, size=2000):
            assert u.contains_point([x]) == (0.25 <= x <= 2.75), x

    def test_monte_carlo_distance_to_complement(self):
        rng = np.random.default_rng(5)
        u = BoxUnion([Box([0, 0], [2, 2]), Box([1.5, 0.5], [3.5, 1.5])])
        r = 0.2
        e = u.eroded(r)
        assert not e.is_empty()
        n_checked = 0
        while n_checked < 10_000:
            p = rng.uniform([0, 0], [3.5, 2.0])
            if not e.contains_point(p):
                continue
            n_checked += 1
            ball = BoxUnion([Box(p - r, p + r)])
            for b in u:
                ball.subtract(b)
                if ball.is_empty():
                    break
            assert ball.is_empty(), f"point {p} closer than {r} to complement"

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            BoxUnion([Box([0], [1])]).erode(-1.0)


class TestBoxDifference:
    def test_disjoint_returns_original(self):
        a = Box([0], [1])
        assert box_difference(a, Box([2], [3]))[0] is a


class TestIntervalMatrixTimesBox:
    def test_degenerate_row(self):
        m = IntervalMatrix.exact([[1.0]])
        got = interval_matrix_times_box(m, Box([-1], [1]))
        assert got.same_as(Box([-1], [1]))

    def test_sign_cases(self):
        m = IntervalMatrix([[-1.0]], [[1.0]])
        got = interval_matrix_times_box(m, Box([2], [3]))
        # enumerate products of {-1,1} x {2,3}
        assert got.same_as(Box([-3], [3]))

    def test_zero_matrix(self):
        m = IntervalMatrix.exact([[0.0, 0.0]])
        got = interval_matrix_times_box(m, Box([-5, 1], [7, 2]))
        assert got.same_as(Box([0], [0]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            interval_matrix_times_box(IntervalMatrix.exact([[1.0]]), Box([0, 0], [1, 1]))

    def test_sampled_soundness(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n, m = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            lo = rng.uniform(-2, 2, size=(n, m))
            hi = lo + rng.uniform(0, 1, size=(n, m))
            im = IntervalMatrix(lo, hi)
            u = random_box(rng, m)
            out = interval_matrix_times_box(im, u)
            for _ in range(20):
                mm = rng.uniform(lo, hi)
                v = rng.uniform(u.lo, u.hi)
                y = mm @ v
                assert np.all(y >= out.lo - 1e-9) and np.all(y <= out.hi + 1e-9)
