"""Control-affine system model and per-box reachability machinery.

The one-step map is x+ = f0(x) + sum_i g_i(x) u_i with u constrained to a
compact box U.  On each state box the model is decomposed as

    f0(x) = A x + phi(x),        phi enclosed by an interval [Phi]
    g_i(x) in {s_i} + [Psi_i],   [Psi_i] centered at the origin

which yields zonotopic forward-reach over-approximations
    P0 = A[x] (+) [Phi] (+) [Psi]U
    P_u = P0 (+) {S u}           (translate of P0)
    P  = P0 (+) SU.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .geometry import Polytope, linear_image, minkowski_sum
from .intervals import Box, BoxUnion, DomainError, IntervalMatrix, interval_matrix_times_box


class SystemModel:
    """Parsed control-affine dynamics with interval and derivative evaluators.

    f0 is a length-n list of expressions; g is a list of m columns, each a
    length-n list of expressions (column i multiplies input u_i).
    """

    def __init__(self, f0, g, u_box: Box, omega0: BoxUnion | None = None):
        self.f0 = list(f0)
        self.g = [list(col) for col in g]
        self.n = len(self.f0)
        self.m = len(self.g)
        if self.n < 1 or self.m < 1:
            raise ValueError("need at least one state and one input")
        if any(len(col) != self.n for col in self.g):
            raise ValueError("every g column must have n components")
        if u_box.dim != self.m:
            raise ValueError(f"input box dimension {u_box.dim} != m = {self.m}")
        self.u_box = u_box
        self.omega0 = omega0
        for e in self.f0 + [c for col in self.g for c in col]:
            bad = [i for i in ex.free_vars(e) if i > self.n]
            if bad:
                raise ValueError(f"expression references x{bad[0]} beyond state dimension {self.n}")

    @classmethod
    def from_strings(cls, f0, g, u_lo, u_hi, omega_boxes=None) -> "SystemModel":
        n = len(f0)
        parsed_f0 = [ex.parse(s, n_vars=n) for s in f0]
        parsed_g = [[ex.parse(s, n_vars=n) for s in col] for col in g]
        omega = BoxUnion([Box(lo, hi) for lo, hi in omega_boxes]) if omega_boxes else None
        return cls(parsed_f0, parsed_g, Box(u_lo, u_hi), omega)

    # -- pointwise dynamics ------------------------------------------------
    def step(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.array([ex.eval_real(e, x) for e in self.f0])
        for i, col in enumerate(self.g):
            out += u[i] * np.array([ex.eval_real(e, x) for e in col])
        return out

    def step_many(self, pts: np.ndarray, u) -> np.ndarray:
        """Vectorized step over rows of pts with a single input u."""
        pts = np.asarray(pts, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.column_stack([ex.eval_real_many(e, pts) for e in self.f0])
        for i, col in enumerate(self.g):
            out += u[i] * np.column_stack([ex.eval_real_many(e, pts) for e in col])
        return out

    # -- interval evaluators -------------------------------------------------
    def f0_interval(self, box: Box) -> Box:
        return Box.from_intervals([ex.eval_interval(e, box) for e in self.f0])

    def g_interval(self, box: Box) -> IntervalMatrix:
        lo = np.empty((self.n, self.m))
        hi = np.empty((self.n, self.m))
        for i, col in enumerate(self.g):
            for j, e in enumerate(col):
                iv = ex.eval_interval(e, box)
                lo[j, i], hi[j, i] = iv.lo, iv.hi
        return IntervalMatrix(lo, hi)

    def f0_jacobian(self, x) -> np.ndarray:
        return np.array([ex.eval_gradient(e, x) for e in self.f0])

    def f0_jacobian_interval(self, box: Box) -> IntervalMatrix:
        lo = np.empty((self.n, self.n))
        hi = np.empty((self.n, self.n))
        for j, e in enumerate(self.f0):
            g = ex.eval_gradient_interval(e, box)
            lo[j], hi[j] = g.lo, g.hi
        return IntervalMatrix(lo, hi)


@dataclass
class AffineDecomposition:
    """Per-box decomposition data (A, [Phi], S, [Psi])."""

    A: np.ndarray
    phi: Box
    S: np.ndarray
    psi: IntervalMatrix
    box: Box


def decompose_f0(model: SystemModel, box: Box, linearize: bool = True):
    """Split f0 into A x + remainder on the box.

    With midpoint linearization, A is the Jacobian at mid([x]) and the
    remainder enclosure comes from the mean-value form, so its width shrinks
    linearly with the box.  Falls back to A = 0 with the natural enclosure
    of f0 when the Jacobian is unavailable.
    """
    if linearize:
        try:
            mid = box.midpoint()
            A = model.f0_jacobian(mid)
            J = model.f0_jacobian_interval(box)
            c = np.array([ex.eval_real(e, mid) for e in model.f0]) - A @ mid
            dev = IntervalMatrix(J.lo - A, J.hi - A)
            half = 0.5 * box.widths()
            spread = interval_matrix_times_box(dev, Box(-half, half))
            return A, Box(spread.lo + c, spread.hi + c)
        except DomainError:
            pass
    return np.zeros((model.n, model.n)), model.f0_interval(box)


def decompose_g(model: SystemModel, box: Box):
    """Columns s_i = mid([g_i]([x])); [Psi_i] the centered residual."""
    giv = model.g_interval(box)
    S = 0.5 * (giv.lo + giv.hi)
    half = 0.5 * (giv.hi - giv.lo)
    return S, IntervalMatrix(-half, half)


def make_decomposition(model: SystemModel, box: Box, linearize: bool = True) -> AffineDecomposition:
    A, phi = decompose_f0(model, box, linearize=linearize)
    S, psi = decompose_g(model, box)
    return AffineDecomposition(A, phi, S, psi, box)


@dataclass
class WidthBounds:
    """Linear width-growth constants and the resulting sandwich radius rho."""

    ltilde: np.ndarray  # length m+1: remainder constant, then one per input
    rho: float


def width_bounds(model: SystemModel, omega: BoxUnion) -> WidthBounds:
    """Global constants over omega's bounding box.

    L0 bounds w([Phi]([x])) <= L0 w([x]) for the mean-value remainder of the
    midpoint linearization; L_i bounds the natural-form width of [g_i].
    rho = L0 + max_i L_i w(U_i) as in the reach-set sandwich.
    """
    bbox = omega.bounding_box()
    if bbox is None:
        raise ValueError("empty region of interest")
    J = model.f0_jacobian_interval(bbox)  # raises on unbounded Jacobian
    l0 = float(np.max(np.sum(J.width(), axis=1)))
    ls = [l0]
    for col in model.g:
        per_comp = []
        for e in col:
            lam = ex.width_growth_constants(e, bbox)
            per_comp.append(float(np.sum(lam)))
        ls.append(max(per_comp))
    lt = np.array(ls)
    uw = model.u_box.widths()
    rho = l0 + float(np.max(lt[1:] * uw))
    return WidthBounds(lt, rho)


# ---------------------------------------------------------------------------
# Polyhedral forward-reach over-approximations
# ---------------------------------------------------------------------------

def reach_P0(dec: AffineDecomposition, u_box: Box) -> Polytope:
    """P0 = A[x] (+) [Phi] (+) [Psi]U  (everything except the S u term)."""
    p = linear_image(dec.A, Polytope.from_box(dec.box))
    p = minkowski_sum(p, Polytope.from_box(dec.phi))
    psi_u = interval_matrix_times_box(dec.psi, u_box)
    if psi_u.width() > 0.0:  # centered, so width 0 means exactly {0}
        p = minkowski_sum(p, Polytope.from_box(psi_u))
    return p


def reach_full(dec: AffineDecomposition, u_box: Box, p0: Polytope | None = None) -> Polytope:
    """P = P0 (+) SU, the reach set over the whole input box."""
    p0 = p0 if p0 is not None else reach_P0(dec, u_box)
    if np.all(dec.S == 0.0):
        return p0
    su = linear_image(dec.S, Polytope.from_box(u_box))
    return minkowski_sum(p0, su)


def reach_fixed(dec: AffineDecomposition, u, u_box: Box, p0: Polytope | None = None) -> Polytope:
    """P_u = P0 translated by S u; u must lie in the input box."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not u_box.contains_point(u, tol=1e-9):
        raise ValueError(f"input {u} outside the admissible box")
    p0 = p0 if p0 is not None else reach_P0(dec, u_box)
    return p0.translate(dec.S @ u)
