import math

import numpy as np
import pytest

from ciskit.dynamics import (
    SystemModel,
    decompose_f0,
    decompose_g,
    make_decomposition,
    reach_P0,
    reach_fixed,
    reach_full,
    width_bounds,
)
from ciskit.geometry import minkowski_sum, convex_hull, Polytope
from ciskit.intervals import Box, BoxUnion
from conftest import pendulum_model, sample_in_box, stable_1d_model


def linear_model():
    # x+ = M x with constant input column
    return SystemModel.from_strings(
        ["0.5*x1 + 0.1*x2", "0.2*x2"], [["1", "0"]], [-1.0], [1.0], [([-1.0, -1.0], [1.0, 1.0])]
    )


class TestSystemModel:
    def test_dimension_validation(self):
        with pytest.raises(ValueError, match="exceeds declared dimension"):
            SystemModel.from_strings(["x3"], [["0"]], [-1], [1])
        with pytest.raises(ValueError, match="n components"):
            SystemModel.from_strings(["x1", "x2"], [["0"]], [-1], [1])

    def test_step_matches_manual(self, pendulum):
        x = np.array([0.02, -0.005])
        u = 0.05
        x1n = x[0] + 0.01 * x[1]
        x2n = x[1] + 0.01 * (98.0 * math.sin(x[0]) - (0.1 / 0.006) * x[1]) + 0.01 * 50.0 * math.cos(
            x[0]
        ) * u
        got = pendulum.step(x, [u])
        assert np.allclose(got, [x1n, x2n], rtol=1e-12)

    def test_step_many_matches_loop(self, pendulum):
        rng = np.random.default_rng(3)
        pts = rng.uniform([-0.05, -0.01], [0.05, 0.01], size=(40, 2))
        got = pendulum.step_many(pts, [0.03])
        for p, y in zip(pts, got):
            assert np.allclose(y, pendulum.step(p, [0.03]), rtol=1e-12)


class TestDecomposeF0:
    def test_linear_system_exact(self):
        m = linear_model()
        box = Box([-1, -1], [1, 1])
        A, phi = decompose_f0(m, box)
        assert np.allclose(A, [[0.5, 0.1], [0.0, 0.2]])
        assert phi.width() == 0.0
        assert np.allclose(phi.lo, 0.0)

    def test_sine_mean_value_bound(self):
        m = SystemModel.from_strings(["sin(x1)"], [["0"]], [-1], [1])
        box = Box([-0.1], [0.1])
        A, phi = decompose_f0(m, box)
        assert A[0, 0] == pytest.approx(1.0)  # cos(0)
        c = (1 - math.cos(0.1)) * 0.1
        assert phi.lo[0] >= -c - 1e-12 and phi.hi[0] <= c + 1e-12
        assert phi.lo[0] == pytest.approx(-phi.hi[0], abs=1e-15)

    def test_zero_a_fallback_natural_enclosure(self):
        m = SystemModel.from_strings(["sin(x1)"], [["0"]], [-1], [1])
        A, phi = decompose_f0(m, Box([0], [math.pi]), linearize=False)
        assert np.all(A == 0.0)
        assert phi.lo[0] == 0.0 and phi.hi[0] == 1.0

    def test_nondifferentiable_falls_back(self):
        m = SystemModel.from_strings(["abs(x1)"], [["0"]], [-1], [1])
        A, phi = decompose_f0(m, Box([-1], [1]))
        assert np.all(A == 0.0)
        assert phi.lo[0] == 0.0 and phi.hi[0] == 1.0

    def test_sampled_soundness(self, pendulum):
        rng = np.random.default_rng(5)
        for _ in range(20):
            lo = rng.uniform([-0.05, -0.01], [0.02, 0.005])
            box = Box(lo, lo + rng.uniform(0.001, 0.03, size=2))
            A, phi = decompose_f0(pendulum, box)
            for p in sample_in_box(rng, box, 50):
                val = np.array(
                    [p[0] + 0.01 * p[1], p[1] + 0.01 * (98.0 * math.sin(p[0]) - (0.1 / 0.006) * p[1])]
                )
                resid = val - A @ p
                assert np.all(resid >= phi.lo - 1e-9) and np.all(resid <= phi.hi + 1e-9)


class TestDecomposeG:
    def test_constant_column(self):
        m = linear_model()
        S, psi = decompose_g(m, Box([-1, -1], [1, 1]))
        assert np.allclose(S, [[1.0], [0.0]])
        assert np.all(psi.width() == 0.0)

    def test_cosine_column(self):
        m = SystemModel.from_strings(["x1"], [["cos(x1)"]], [-1], [1])
        S, psi = decompose_g(m, Box([-0.05], [0.05]))
        assert S[0, 0] == pytest.approx((1 + math.cos(0.05)) / 2, abs=1e-12)
        half = (1 - math.cos(0.05)) / 2
        assert psi.hi[0, 0] == pytest.approx(half, abs=1e-12)
        assert psi.lo[0, 0] == pytest.approx(-half, abs=1e-12)

    def test_identity_column(self):
        m = SystemModel.from_strings(["x1"], [["x1"]], [-1], [1])
        S, psi = decompose_g(m, Box([0], [1]))
        assert S[0, 0] == 0.5
        assert psi.lo[0, 0] == -0.5 and psi.hi[0, 0] == 0.5

    def test_centering_exact(self, pendulum):
        rng = np.random.default_rng(7)
        for _ in range(50):
            lo = rng.uniform([-0.05, -0.01], [0.02, 0.005])
            box = Box(lo, lo + rng.uniform(0.001, 0.03, size=2))
            _, psi = decompose_g(pendulum, box)
            assert np.all(psi.lo == -psi.hi)  # mid is exactly zero

    def test_sampled_soundness(self, pendulum):
        rng = np.random.default_rng(9)
        box = Box([-0.05, -0.01], [0.05, 0.01])
        S, psi = decompose_g(pendulum, box)
        for p in sample_in_box(rng, box, 100):
            gval = np.array([0.0, 0.01 * 50.0 * math.cos(p[0])])
            resid = gval - S[:, 0]
            assert np.all(resid >= psi.lo[:, 0] - 1e-9) and np.all(resid <= psi.hi[:, 0] + 1e-9)


class TestWidthBounds:
    def test_linear_system_zero(self):
        m = linear_model()
        wb = width_bounds(m, m.omega0)
        assert np.allclose(wb.ltilde, 0.0)
        assert wb.rho == 0.0

    def test_prop4_bounds_random_subboxes(self, pendulum):
        rng = np.random.default_rng(11)
        wb = width_bounds(pendulum, pendulum.omega0)
        for _ in range(100):
            lo = rng.uniform([-0.05, -0.01], [0.03, 0.005])
            box = Box(lo, np.minimum(lo + rng.uniform(1e-4, 0.05, size=2), [0.05, 0.01]))
            _, phi = decompose_f0(pendulum, box)
            assert phi.width() <= wb.ltilde[0] * box.width() + 1e-12
            _, psi = decompose_g(pendulum, box)
            assert np.max(psi.width()) <= wb.ltilde[1] * box.width() + 1e-12

    def test_rho_definition(self, pendulum):
        wb = width_bounds(pendulum, pendulum.omega0)
        uw = pendulum.u_box.widths()
        assert wb.rho == pytest.approx(wb.ltilde[0] + np.max(wb.ltilde[1:] * uw))
        assert wb.rho > 0.0

    def test_remainder_width_halves_with_box(self, pendulum):
        box = Box([-0.04, -0.008], [0.04, 0.008])
        _, phi1 = decompose_f0(pendulum, box)
        l, r = box.bisect()
        _, phi2 = decompose_f0(pendulum, l)
        # mean-value remainder shrinks at least linearly, with slack
        assert phi2.width() <= 0.6 * phi1.width()


class TestReachSets:
    def test_linear_no_remainder_is_a_image(self):
        m = linear_model()
        box = Box([0, 0], [1, 1])
        dec = make_decomposition(m, box)
        p0 = reach_P0(dec, m.u_box)
        want = convex_hull((dec.A @ box.corners().T).T)
        assert np.allclose(
            sorted(map(tuple, np.round(p0.vertices(), 12))),
            sorted(map(tuple, np.round(want.vertices(), 12))),
        )

    def test_box_sums(self):
        # A = I, Phi = [-0.1,0.1]^2, Psi = 0: P0 = [x] + Phi
        m = SystemModel.from_strings(["x1", "x2"], [["1", "0"]], [-1], [1])
        dec = make_decomposition(m, Box([0, 0], [1, 1]))
        dec.phi = Box([-0.1, -0.1], [0.1, 0.1])
        p0 = reach_P0(dec, m.u_box)
        assert p0.bounding_box().same_as(Box([-0.1, -0.1], [1.1, 1.1]))
        assert p0.volume() == pytest.approx(1.2 * 1.2)

    def test_pendulum_p0_facet_count(self, pendulum):
        box = Box([-0.05, -0.01], [0.05, 0.01])
        dec = make_decomposition(pendulum, box)
        p0 = reach_P0(dec, pendulum.u_box)
        H, b = p0.halfspaces()
        assert H.shape[0] <= 8  # zonotope: parallelogram + axis box

    def test_reach_full_equals_p0_when_s_zero(self):
        m = SystemModel.from_strings(["x1", "x2"], [["0", "0"]], [-1], [1])
        dec = make_decomposition(m, Box([0, 0], [1, 1]))
        p0 = reach_P0(dec, m.u_box)
        p = reach_full(dec, m.u_box, p0)
        assert np.allclose(sorted(map(tuple, p.vertices())), sorted(map(tuple, p0.vertices())))

    def test_reach_full_1d_sum(self):
        m = stable_1d_model()
        dec = make_decomposition(m, Box([0], [1]))
        p = reach_full(dec, m.u_box)
        assert p.bounding_box().same_as(Box([-1], [2]))

    def test_reach_fixed_translates(self):
        m = stable_1d_model()
        dec = make_decomposition(m, Box([0], [1]))
        p0 = reach_P0(dec, m.u_box)
        pu = reach_fixed(dec, [0.5], m.u_box, p0)
        assert pu.bounding_box().same_as(Box([0.5], [1.5]))
        p_zero = reach_fixed(dec, [0.0], m.u_box, p0)
        assert p_zero.bounding_box().same_as(Box([0], [1]))

    def test_reach_fixed_rejects_outside_input(self):
        m = stable_1d_model()
        dec = make_decomposition(m, Box([0], [1]))
        with pytest.raises(ValueError, match="outside"):
            reach_fixed(dec, [2.0], m.u_box)

    def test_pendulum_fixed_input_translation_direction(self, pendulum):
        box = Box([-0.05, -0.01], [0.05, 0.01])
        dec = make_decomposition(pendulum, box)
        p0 = reach_P0(dec, pendulum.u_box)
        pu = reach_fixed(dec, [0.1], pendulum.u_box, p0)
        shift = dec.S @ [0.1]
        assert shift[0] == 0.0 and shift[1] > 0.0
        assert np.allclose(
            sorted(map(tuple, pu.vertices())), sorted(map(tuple, p0.vertices() + shift))
        )


def _boundary_points(box, k):
    """Corners plus dense samples of the box boundary (the image hull's
    extreme points come from there for smooth maps)."""
    if box.dim == 1:
        return np.array([[box.lo[0]], [box.hi[0]]])
    t = np.linspace(0.0, 1.0, k)
    lo, hi = box.lo, box.hi
    edges = []
    for d in range(box.dim):
        for fixed in (lo, hi):
            for other_fixed in (lo, hi):
                pt = np.tile(other_fixed, (k, 1))
                pt[:, d] = lo[d] + t * (hi[d] - lo[d])
                pt[:, 1 - d if box.dim == 2 else 0] = fixed[1 - d if box.dim == 2 else 0]
                edges.append(pt)
    return np.vstack(edges + [box.corners()])


def _sandwich_check(model, box, rng, n_low=1000, n_edge=500):
    from ciskit.dynamics import width_bounds as wb_fn

    wb = wb_fn(model, BoxUnion([box]))
    dec = make_decomposition(model, box)
    p0 = reach_P0(dec, model.u_box)
    u = rng.uniform(model.u_box.lo, model.u_box.hi)
    pu = reach_fixed(dec, u, model.u_box, p0)
    Hu, bu = pu.halfspaces()
    # lower inclusion: sampled images always land inside P_u-bar
    pts = sample_in_box(rng, box, n_low)
    img = model.step_many(pts, u)
    assert np.all(Hu @ img.T <= bu[:, None] + 1e-9)
    # upper inclusion: P_u-bar vertices within rho*w of the image cloud hull
    cloud = model.step_many(_boundary_points(box, n_edge), u)
    r = wb.rho * box.width() + 1e-6
    ball = Polytope.from_box(Box(-r * np.ones(box.dim), r * np.ones(box.dim)))
    blown = minkowski_sum(convex_hull(cloud), ball)
    Hb, bb = blown.halfspaces()
    assert np.all(Hb @ pu.vertices().T <= bb[:, None] + 1e-9)


class TestSandwich:
    def test_pendulum(self, pendulum):
        rng = np.random.default_rng(13)
        for _ in range(5):
            lo = rng.uniform([-0.05, -0.01], [0.02, 0.004])
            box = Box(lo, np.minimum(lo + rng.uniform(0.005, 0.05, size=2), [0.05, 0.01]))
            _sandwich_check(pendulum, box, rng)

    def test_random_polynomial_trig_systems(self):
        rng = np.random.default_rng(15)
        for sys_idx in range(3):
            a, b, c, d = rng.uniform(-1, 1, size=4)
            k = rng.uniform(0.5, 1.5)
            model = SystemModel.from_strings(
                [
                    f"x1 + 0.05*({a:.3f}*x2 + {b:.3f}*sin(x1))",
                    f"x2 + 0.05*({c:.3f}*x1 + {d:.3f}*x2 + 0.1*x1^2)",
                ],
                [["0", f"0.05*{k:.3f}*cos(x1)"]],
                [-0.5],
                [0.5],
                [([-0.3, -0.3], [0.3, 0.3])],
            )
            for _ in range(3):
                lo = rng.uniform([-0.3, -0.3], [0.1, 0.1])
                box = Box(lo, np.minimum(lo + rng.uniform(0.01, 0.2, size=2), [0.3, 0.3]))
                _sandwich_check(model, box, rng, n_low=300, n_edge=300)
