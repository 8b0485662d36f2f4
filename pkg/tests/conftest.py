"""Shared test helpers: random expression/box generators and the pendulum model."""
import numpy as np
import pytest

from ciskit.dynamics import SystemModel
from ciskit.expr import Bin, Call, Neg, Num, Pow, Var
from ciskit.intervals import Box

# Inverted pendulum on a cart, forward Euler at dt = 0.01:
#   x1' = x2,  x2' = (m g l / J) sin x1 - (b / J) x2 + (l / J) cos(x1) u
# with m=0.2, g=9.8, l=0.3, J=0.006, b=0.1.  Written in collected form
# (each state variable appears once per component) so the natural interval
# extension is the exact range.
PENDULUM_F0 = [
    "x1 + 0.01*x2",
    "(1 - 0.01*0.1/0.006)*x2 + 0.01*9.8*0.2*0.3/0.006*sin(x1)",
]
PENDULUM_G = [["0", "0.01*(0.3/0.006)*cos(x1)"]]
PENDULUM_OMEGA = ([-0.05, -0.01], [0.05, 0.01])
PENDULUM_U = ([-0.1], [0.1])


def pendulum_model() -> SystemModel:
    return SystemModel.from_strings(
        PENDULUM_F0, PENDULUM_G, PENDULUM_U[0], PENDULUM_U[1], [PENDULUM_OMEGA]
    )


@pytest.fixture(scope="session")
def pendulum():
    return pendulum_model()


def stable_1d_model() -> SystemModel:
    """x+ = x + u on omega = [-1, 1] with u in [-1, 1]; invariant as a whole."""
    return SystemModel.from_strings(["x1"], [["1"]], [-1.0], [1.0], [([-1.0], [1.0])])


def random_control_affine_model(rng) -> SystemModel:
    """Small planar system with polynomial/trig drift and a cos input column."""
    a, b, c, d = rng.uniform(-1, 1, size=4)
    k = rng.uniform(0.5, 1.5)
    return SystemModel.from_strings(
        [
            f"x1 + 0.05*({a:.3f}*x2 + {b:.3f}*sin(x1))",
            f"x2 + 0.05*({c:.3f}*x1 + {d:.3f}*x2 + 0.1*x1^2)",
        ],
        [["0", f"0.05*{k:.3f}*cos(x1)"]],
        [-0.5],
        [0.5],
        [([-0.3, -0.3], [0.3, 0.3])],
    )


# session-scoped pendulum runs shared between the algorithm tests and the
# acceptance suite (each takes several seconds)

@pytest.fixture(scope="session")
def pendulum_fixpoint(pendulum):
    from ciskit.algorithms import fixpoint

    return fixpoint(pendulum.omega0, pendulum, 1e-3)


@pytest.fixture(scope="session")
def pendulum_accelerated(pendulum):
    from ciskit.algorithms import accelerated

    return accelerated(pendulum.omega0, pendulum, 1e-3)


@pytest.fixture(scope="session")
def pendulum_baseline10(pendulum):
    from ciskit.algorithms import baseline_sampled

    return baseline_sampled(pendulum.omega0, pendulum, 1e-3, 10)


@pytest.fixture(scope="session")
def pendulum_baseline1000(pendulum):
    from ciskit.algorithms import baseline_sampled

    return baseline_sampled(pendulum.omega0, pendulum, 1e-3, 1000)

SMOOTH_FUNCS = ("sin", "cos", "exp")
ALL_FUNCS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")


def _num(rng):
    # parser never yields negative literals ('-' parses as Neg), so stay canonical
    v = round(float(rng.uniform(-3, 3)), 3)
    return Neg(Num(-v)) if v < 0 else Num(v)


def random_expr(rng, n_vars, depth, funcs=SMOOTH_FUNCS, allow_div=True):
    """Random expression tree of the given depth over x1..x{n_vars}."""
    if depth <= 0:
        if rng.random() < 0.4:
            return _num(rng)
        return Var(int(rng.integers(1, n_vars + 1)))
    r = rng.random()
    if r < 0.55:
        op = rng.choice(["+", "-", "*", "/"] if allow_div else ["+", "-", "*"])
        return Bin(
            str(op),
            random_expr(rng, n_vars, depth - 1, funcs, allow_div),
            random_expr(rng, n_vars, depth - 1, funcs, allow_div),
        )
    if r < 0.75:
        return Call(str(rng.choice(list(funcs))), random_expr(rng, n_vars, depth - 1, funcs, allow_div))
    if r < 0.85:
        return Neg(random_expr(rng, n_vars, depth - 1, funcs, allow_div))
    if r < 0.95:
        return Pow(random_expr(rng, n_vars, depth - 1, funcs, allow_div), int(rng.integers(1, 4)))
    return _num(rng)


def random_box(rng, n, lo=-2.0, hi=2.0, max_width=1.0):
    a = rng.uniform(lo, hi - max_width, size=n)
    w = rng.uniform(0.01, max_width, size=n)
    return Box(a, a + w)


def sample_in_box(rng, box, k):
    return rng.uniform(box.lo, box.hi, size=(k, box.dim))
