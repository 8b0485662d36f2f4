"""Polytope kernel: dual H/V representations, Minkowski sums, translation
(insertion/overlap) sets, intersection tests, and set differences that
produce unions of polytopes.

Scope is desk scale: dimensions 1 and 2 are fully supported, including
degenerate (lower-dimensional) polytopes -- points and segments are
first-class, carried as paired opposing inequalities.  Dimension 3 is
supported for non-degenerate hulls via Qhull.

Tolerances: vertex/facet membership 1e-9 (rows are normalized to unit
2-norm, so this is scale-free); vertex dedupe 1e-11; affine-dimension
rank cut 1e-9.
"""
from __future__ import annotations

import numpy as np

from .intervals import Box

FEAS_TOL = 1e-9
DEDUPE_TOL = 1e-11
RANK_TOL = 1e-9


class GeometryError(ValueError):
    pass


class Halfspace:
    """Halfspace {x : h.x <= b} with h != 0."""

    __slots__ = ("h", "b")

    def __init__(self, h, b: float):
        h = np.asarray(h, dtype=float)
        n = float(np.linalg.norm(h))
        if n == 0.0:
            raise GeometryError("halfspace normal must be nonzero")
        self.h = h / n
        self.b = float(b) / n

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        return float(self.h @ np.asarray(x, dtype=float)) <= self.b + tol


def _dedupe_points(pts: np.ndarray) -> np.ndarray:
    """Drop near-duplicates by snapping to a DEDUPE_TOL grid.  Points a hair
    apart across a grid line may both survive, which is harmless for hulls."""
    if len(pts) <= 1:
        return pts
    key = np.round(pts / DEDUPE_TOL).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(idx)]


def _hull_2d(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counterclockwise; handles collinear input
    (returns the two extreme points) and single points."""
    pts = _dedupe_points(np.asarray(pts, dtype=float))
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    p = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for q in p:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper: list = []
    for q in p[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 2:  # fully collinear collapses; keep extremes
        d = p[-1] - p[0]
        if np.max(np.abs(d)) <= DEDUPE_TOL:
            return p[:1]
        t = p @ d
        return np.array([p[np.argmin(t)], p[np.argmax(t)]])
    return hull


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


class Polytope:
    """Bounded polyhedron with lazily synchronized H- and V-representations.

    Construct via from_vertices / from_halfspaces / from_box.  Instances are
    immutable after construction; representation conversions fill caches
    under single assignment, so read-only sharing is safe.
    """

    __slots__ = ("n", "_H", "_b", "_V")

    def __init__(self, n: int):
        self.n = n
        self._H = None
        self._b = None
        self._V = None

    # -- constructors ------------------------------------------------------
    @classmethod
    def empty(cls, n: int) -> "Polytope":
        p = cls(n)
        p._V = np.empty((0, n))
        return p

    @classmethod
    def from_vertices(cls, pts) -> "Polytope":
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.size == 0:
            raise GeometryError("from_vertices needs at least one point")
        n = pts.shape[1]
        p = cls(n)
        if n == 1:
            lo, hi = float(pts.min()), float(pts.max())
            p._V = np.array([[lo]]) if hi - lo <= DEDUPE_TOL else np.array([[lo], [hi]])
        elif n == 2:
            p._V = _hull_2d(pts)
        elif n == 3:
            p._V = cls._hull_3d(pts)
        else:
            raise GeometryError(f"dimension {n} not supported (desk scale is n <= 3)")
        return p

    @staticmethod
    def _hull_3d(pts: np.ndarray) -> np.ndarray:
        pts = _dedupe_points(pts)
        if _affine_dim_of(pts) < 3:
            raise GeometryError("degenerate 3-D hulls are not supported")
        from scipy.spatial import ConvexHull

        hull = ConvexHull(pts)
        return pts[hull.vertices]

    @classmethod
    def from_halfspaces(cls, H, b, trusted: bool = False) -> "Polytope":
        """Build from {x : Hx <= b}.  Unless `trusted`, assert boundedness
        (empty recession cone) via small LPs and reject unbounded input."""
        H = np.atleast_2d(np.asarray(H, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if H.shape[0] != b.shape[0]:
            raise GeometryError("H and b row counts differ")
        norms = np.linalg.norm(H, axis=1)
        if np.any(norms == 0.0):
            raise GeometryError("zero row in H")
        H = H / norms[:, None]
        b = b / norms
        p = cls(H.shape[1])
        p._H = H
        p._b = b
        if not trusted:
            p._assert_bounded()
        p._compute_vertices()
        p._prune_rows()
        return p

    @classmethod
    def from_box(cls, box: Box) -> "Polytope":
        n = box.dim
        p = cls(n)
        p._H = np.vstack([np.eye(n), -np.eye(n)])
        p._b = np.concatenate([box.hi, -box.lo])
        p._V = _dedupe_points(box.corners()) if n <= 2 else box.corners()
        if n == 2 and len(p._V) == 4:
            p._V = _hull_2d(p._V)
        return p

    # -- representation access ----------------------------------------------
    def is_empty(self) -> bool:
        return len(self.vertices()) == 0

    def vertices(self) -> np.ndarray:
        if self._V is None:
            self._compute_vertices()
        return self._V

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        if self._H is None:
            self._compute_halfspaces()
        return self._H, self._b

    def _assert_bounded(self):
        from scipy.optimize import linprog

        H, b = self._H, self._b
        n = self.n
        # any recession direction d (Hd <= 0, |d| <= 1) with a nonzero
        # coordinate certifies unboundedness
        for j in range(n):
            for sign in (1.0, -1.0):
                c = np.zeros(n)
                c[j] = -sign
                r = linprog(c, A_ub=H, b_ub=np.zeros(len(b)), bounds=(-1, 1), method="highs")
                if r.status == 0 and -r.fun > 1e-6:
                    raise GeometryError("unbounded H-representation")

    def _compute_vertices(self):
        H, b = self._H, self._b
        n = self.n
        if n == 1:
            lo, hi = -np.inf, np.inf
            for h, bb in zip(H[:, 0], b):
                if h > 0:
                    hi = min(hi, bb / h)
                else:
                    lo = max(lo, bb / h)
            if not np.isfinite(lo) or not np.isfinite(hi) or lo > hi + FEAS_TOL:
                self._V = np.empty((0, 1))
            elif hi - lo <= DEDUPE_TOL:
                self._V = np.array([[0.5 * (lo + hi)]])
            else:
                self._V = np.array([[lo], [hi]])
            return
        if n == 2:
            i, j = np.triu_indices(len(b), k=1)
            a1, a2 = H[i], H[j]
            det = a1[:, 0] * a2[:, 1] - a1[:, 1] * a2[:, 0]
            ok = np.abs(det) > 1e-12
            i, j, a1, a2, det = i[ok], j[ok], a1[ok], a2[ok], det[ok]
            x = (b[i] * a2[:, 1] - b[j] * a1[:, 1]) / det
            y = (a1[:, 0] * b[j] - a2[:, 0] * b[i]) / det
            cand = np.column_stack([x, y])
        elif n == 3:
            cand_list = []
            m = len(b)
            for i in range(m):
                for j in range(i + 1, m):
                    for k in range(j + 1, m):
                        A = H[[i, j, k]]
                        if abs(np.linalg.det(A)) <= 1e-12:
                            continue
                        cand_list.append(np.linalg.solve(A, b[[i, j, k]]))
            cand = np.array(cand_list) if cand_list else np.empty((0, 3))
        else:
            raise GeometryError(f"vertex enumeration unsupported for n={self.n}")
        if len(cand):
            feas = np.all(H @ cand.T <= b[:, None] + FEAS_TOL, axis=0)
            cand = cand[feas]
        if len(cand) == 0:
            self._V = np.empty((0, n))
            return
        cand = _dedupe_points(cand)
        self._V = _hull_2d(cand) if n == 2 and len(cand) > 2 else cand

    def _compute_halfspaces(self):
        v = self.vertices()
        n = self.n
        if len(v) == 0:
            # canonical infeasible system
            self._H = np.vstack([np.eye(n)[:1], -np.eye(n)[:1]])
            self._b = np.array([-1.0, -1.0])
            return
        if n == 1:
            self._H = np.array([[1.0], [-1.0]])
            self._b = np.array([float(v.max()), -float(v.min())])
            return
        if n == 2:
            self._compute_halfspaces_2d(v)
            return
        # n == 3, non-degenerate by construction
        from scipy.spatial import ConvexHull

        hull = ConvexHull(v)
        H = hull.equations[:, :3]
        b = -hull.equations[:, 3]
        norms = np.linalg.norm(H, axis=1)
        self._H = H / norms[:, None]
        self._b = b / norms
        self._dedupe_rows()

    def _compute_halfspaces_2d(self, v: np.ndarray):
        if len(v) == 1:
            self._H = np.vstack([np.eye(2), -np.eye(2)])
            self._b = np.concatenate([v[0], -v[0]])
            return
        if len(v) == 2:
            t = v[1] - v[0]
            t = t / np.linalg.norm(t)
            nrm = np.array([-t[1], t[0]])
            proj = v @ t
            self._H = np.vstack([nrm, -nrm, t, -t])
            self._b = np.array(
                [float(nrm @ v[0]), -float(nrm @ v[0]), float(proj.max()), -float(proj.min())]
            )
            return
        rows, offs = [], []
        k = len(v)
        for i in range(k):
            p, q = v[i], v[(i + 1) % k]
            d = q - p
            nrm = np.array([d[1], -d[0]])  # outward for CCW order
            ln = np.linalg.norm(nrm)
            if ln <= DEDUPE_TOL:
                continue
            nrm = nrm / ln
            rows.append(nrm)
            offs.append(float(nrm @ p))
        self._H = np.array(rows)
        self._b = np.array(offs)

    def _dedupe_rows(self):
        H, b = self._H, self._b
        keep = []
        for i in range(len(b)):
            dup = False
            for j in keep:
                if np.max(np.abs(H[i] - H[j])) < 1e-9 and abs(b[i] - b[j]) < 1e-9:
                    dup = True
                    break
            if not dup:
                keep.append(i)
        self._H, self._b = H[keep], b[keep]

    def _prune_rows(self):
        """Drop rows not active at any vertex; they cannot support the set."""
        v = self.vertices()
        if len(v) == 0 or self._H is None:
            return
        act = np.any(np.abs(self._H @ v.T - self._b[:, None]) <= 1e-7, axis=1)
        if act.any():
            self._H, self._b = self._H[act], self._b[act]

    # -- queries -------------------------------------------------------------
    def affine_dim(self) -> int:
        return _affine_dim_of(self.vertices())

    def contains_point(self, x, tol: float = FEAS_TOL) -> bool:
        if self.is_empty():
            return False
        H, b = self.halfspaces()
        return bool(np.all(H @ np.asarray(x, dtype=float) <= b + tol))

    def bounding_box(self) -> Box:
        v = self.vertices()
        if len(v) == 0:
            raise GeometryError("empty polytope has no bounding box")
        return Box(v.min(axis=0), v.max(axis=0))

    def representative_point(self) -> np.ndarray:
        """A point in the relative interior (vertex centroid)."""
        v = self.vertices()
        if len(v) == 0:
            raise GeometryError("empty polytope has no representative point")
        return v.mean(axis=0)

    def volume(self) -> float:
        v = self.vertices()
        if len(v) == 0:
            return 0.0
        if self.n == 1:
            return float(v.max() - v.min())
        if self.n == 2:
            return 0.0 if len(v) < 3 else _shoelace(v)
        if _affine_dim_of(v) < 3:
            return 0.0
        from scipy.spatial import ConvexHull

        return float(ConvexHull(v).volume)

    def translate(self, t) -> "Polytope":
        t = np.asarray(t, dtype=float)
        out = Polytope(self.n)
        if self._V is not None:
            out._V = self._V + t
        if self._H is not None:
            out._H = self._H.copy()
            out._b = self._b + self._H @ t
        return out

    def to_json(self) -> dict:
        H, b = self.halfspaces()
        return {"H": H.tolist(), "b": b.tolist(), "V": self.vertices().tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Polytope":
        if not d["V"]:
            n = len(d["H"][0]) if d["H"] else 1
            return cls.empty(n)
        p = cls.from_vertices(np.array(d["V"]))
        return p

    def __repr__(self):
        if self.is_empty():
            return f"Polytope(empty, n={self.n})"
        return f"Polytope(n={self.n}, {len(self.vertices())} vertices)"


def _affine_dim_of(pts: np.ndarray) -> int:
    if len(pts) == 0:
        return -1
    if len(pts) == 1:
        return 0
    c = pts - pts.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    scale = max(1.0, float(s[0]))
    return int(np.sum(s > RANK_TOL * scale))


class PolyUnion:
    """Finite union of same-dimension polytopes."""

    def __init__(self, parts):
        self.parts = [p for p in parts if not p.is_empty()]
        if self.parts:
            n = self.parts[0].n
            if any(p.n != n for p in self.parts):
                raise GeometryError("mixed dimensions in polytope union")

    def is_empty(self) -> bool:
        return not self.parts

    def contains_point(self, x, tol: float = FEAS_TOL) -> bool:
        return any(p.contains_point(x, tol) for p in self.parts)

    def volume(self) -> float:
        return union_volume(self)

    def to_json(self) -> list:
        return [p.to_json() for p in self.parts]

    @classmethod
    def from_json(cls, arr) -> "PolyUnion":
        return cls([Polytope.from_json(d) for d in arr])

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)


# ---------------------------------------------------------------------------
# Hulls, sums, images
# ---------------------------------------------------------------------------

def convex_hull(points) -> Polytope:
    return Polytope.from_vertices(points)


def minkowski_sum(p: Polytope, q: Polytope) -> Polytope:
    """Exact Minkowski sum via hull of pairwise vertex sums."""
    if p.n != q.n:
        raise GeometryError("dimension mismatch in Minkowski sum")
    vp, vq = p.vertices(), q.vertices()
    if len(vp) == 0 or len(vq) == 0:
        return Polytope.empty(p.n)
    sums = (vp[:, None, :] + vq[None, :, :]).reshape(-1, p.n)
    return Polytope.from_vertices(sums)


def linear_image(A, p: Polytope) -> Polytope:
    """Image {Av : v in p}; A may be rectangular or singular."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    v = p.vertices()
    if len(v) == 0:
        return Polytope.empty(A.shape[0])
    return Polytope.from_vertices(v @ A.T)


# ---------------------------------------------------------------------------
# Translation sets
# ---------------------------------------------------------------------------

def insertion_set(p: Polytope, q: Polytope) -> Polytope:
    """All translations r with p + {r} inside q; empty when p does not fit."""
    if p.is_empty() or q.is_empty():
        raise GeometryError("insertion set of empty polytope")
    Hq, bq = q.halfspaces()
    beta = np.max(Hq @ p.vertices().T, axis=1)
    return Polytope.from_halfspaces(Hq, bq - beta, trusted=True)


def overlap_set(p: Polytope, q: Polytope) -> Polytope:
    """All translations s with (p + {s}) meeting q; equals q + (-p)."""
    if p.is_empty() or q.is_empty():
        raise GeometryError("overlap set of empty polytope")
    Hp, bp = p.halfspaces()
    Hq, bq = q.halfspaces()
    alpha = np.min(Hq @ p.vertices().T, axis=1)
    gamma = np.min(Hp @ q.vertices().T, axis=1)
    H = np.vstack([Hq, -Hp])
    b = np.concatenate([bq - alpha, bp - gamma])
    return Polytope.from_halfspaces(H, b, trusted=True)


def overlap_halfspace(p: Polytope, hs: Halfspace) -> Halfspace:
    """Translations of p that meet the halfspace {x : h.x <= b}."""
    alpha = float(np.min(p.vertices() @ hs.h))
    return Halfspace(hs.h, hs.b - alpha)


# ---------------------------------------------------------------------------
# Intersection
# ---------------------------------------------------------------------------

def intersects_facet_criterion(p: Polytope, q: Polytope, tol: float = FEAS_TOL) -> bool:
    """Two-sided facet test: p meets every halfspace of q and vice versa.
    Exact for convex polygons (n <= 2); a necessary condition beyond that."""
    if p.is_empty() or q.is_empty():
        return False
    Hq, bq = q.halfspaces()
    if np.any(np.min(Hq @ p.vertices().T, axis=1) > bq + tol):
        return False
    Hp, bp = p.halfspaces()
    return not np.any(np.min(Hp @ q.vertices().T, axis=1) > bp + tol)


def intersects_lp(p: Polytope, q: Polytope, tol: float = FEAS_TOL) -> bool:
    """Feasibility LP on the stacked constraints."""
    if p.is_empty() or q.is_empty():
        return False
    from scipy.optimize import linprog

    Hp, bp = p.halfspaces()
    Hq, bq = q.halfspaces()
    H = np.vstack([Hp, Hq])
    b = np.concatenate([bp, bq])
    r = linprog(np.zeros(p.n), A_ub=H, b_ub=b + tol, bounds=(None, None), method="highs")
    return r.status == 0


def intersects(p: Polytope, q: Polytope) -> bool:
    """True iff the closed polytopes meet (exact up to 1e-9)."""
    if p.n != q.n:
        raise GeometryError("dimension mismatch in intersection test")
    if p.is_empty() or q.is_empty():
        return False
    # cheap bounding-box reject
    bp, bq = p.bounding_box(), q.bounding_box()
    if np.any(bp.lo > bq.hi + FEAS_TOL) or np.any(bq.lo > bp.hi + FEAS_TOL):
        return False
    if p.n <= 2:
        return intersects_facet_criterion(p, q)
    return intersects_lp(p, q)


def intersect_halfspace(p: Polytope, h, b: float) -> Polytope:
    """p clipped to {x : h.x <= b}.

    In 2-D this clips the hull-ordered vertex chain directly (exact and
    linear in the vertex count); 1-D clips the interval; otherwise the row
    is stacked onto the H-representation.
    """
    if p.is_empty():
        return p
    h = np.asarray(h, dtype=float)
    if p.n == 2:
        out = Polytope(2)
        out._V = _clip_chain(p.vertices(), h, float(b))
        return out
    if p.n == 1:
        v = p.vertices().ravel()
        lo, hi = float(v.min()), float(v.max())
        if h[0] > 0:
            hi = min(hi, b / h[0])
        elif h[0] < 0:
            lo = max(lo, b / h[0])
        if lo > hi:
            return Polytope.empty(1)
        out = Polytope(1)
        out._V = np.array([[lo]]) if hi - lo <= DEDUPE_TOL else np.array([[lo], [hi]])
        return out
    H, bb = p.halfspaces()
    nrm = np.linalg.norm(h)
    return Polytope.from_halfspaces(
        np.vstack([H, h / nrm]), np.concatenate([bb, [b / nrm]]), trusted=True
    )


def _clip_chain(v: np.ndarray, h, b: float) -> np.ndarray:
    """Clip a convex CCW vertex chain (polygon, segment or point) to h.x <= b.
    Output stays in hull order; convexity is preserved.  Closed semantics:
    boundary contact is retained."""
    if len(v) == 0:
        return v
    d = v @ h - b
    if np.all(d <= 0.0):
        return v
    if np.all(d >= 0.0):
        touch = v[d <= DEDUPE_TOL]
        return touch if len(touch) else np.empty((0, 2))
    if len(v) == 2:
        (p, q), (dp, dq) = v, d
        cut = p + (q - p) * (dp / (dp - dq))
        kept = p if dp <= 0.0 else q
        if np.max(np.abs(cut - kept)) <= DEDUPE_TOL:
            return kept[None, :]
        return np.vstack([kept, cut])
    out = []
    k = len(v)
    for i in range(k):
        p, q = v[i], v[(i + 1) % k]
        dp, dq = d[i], d[(i + 1) % k]
        if dp <= 0.0:
            out.append(p)
        if (dp > 0.0) != (dq > 0.0):
            out.append(p + (q - p) * (dp / (dp - dq)))
    if not out:
        return np.empty((0, 2))
    arr = np.array(out)
    keep = [0]
    for i in range(1, len(arr)):
        if np.max(np.abs(arr[i] - arr[keep[-1]])) > DEDUPE_TOL:
            keep.append(i)
    if len(keep) > 1 and np.max(np.abs(arr[keep[-1]] - arr[keep[0]])) <= DEDUPE_TOL:
        keep.pop()
    return arr[keep]


def intersect(p: Polytope, q: Polytope) -> Polytope:
    if p.n != q.n:
        raise GeometryError("dimension mismatch in intersection")
    if p.is_empty():
        return p
    if q.is_empty():
        return q
    if p.n <= 2:
        out = p
        H, b = q.halfspaces()
        for i in range(len(b)):
            out = intersect_halfspace(out, H[i], b[i])
            if out.is_empty():
                break
        return out
    Hp, bp = p.halfspaces()
    Hq, bq = q.halfspaces()
    return Polytope.from_halfspaces(np.vstack([Hp, Hq]), np.concatenate([bp, bq]), trusted=True)


# ---------------------------------------------------------------------------
# Set difference (recursive facet splitting)
# ---------------------------------------------------------------------------

def set_difference(p: Polytope, qs) -> PolyUnion:
    """Interior-disjoint polytopes covering closure(p minus union of qs).

    Recursive facet splitting: for each facet of the first intersecting
    subtrahend, emit the clipped part of p beyond it, recurse with the rest.
    Worst case is exponential in the subtrahend count; fine at desk scale.
    Pieces of lower affine dimension than p (boundary slivers) are dropped.
    """
    if isinstance(qs, PolyUnion):
        qs = list(qs.parts)
    qs = [q for q in qs if not q.is_empty()]
    if p.is_empty():
        return PolyUnion([])
    return PolyUnion(_regiondiff(p, qs, p.affine_dim()))


def _regiondiff(p: Polytope, qs, keep_dim: int):
    qs = [q for q in qs if intersects(p, q)]
    if not qs:
        return [p]
    q0 = qs[0]
    rest = qs[1:]
    pieces = []
    remainder = p
    H, b = q0.halfspaces()
    for i in range(len(b)):
        beyond = intersect_halfspace(remainder, -H[i], -b[i])
        if not beyond.is_empty() and beyond.affine_dim() == keep_dim:
            pieces.extend(_regiondiff(beyond, rest, keep_dim))
        remainder = intersect_halfspace(remainder, H[i], b[i])
        if remainder.is_empty():
            break
    return pieces


def union_volume(u) -> float:
    """Exact volume of a union (pairwise refinement handles overlaps)."""
    parts = list(u.parts if isinstance(u, PolyUnion) else u)
    total = 0.0
    seen: list[Polytope] = []
    for p in parts:
        if p.is_empty():
            continue
        if not seen:
            total += p.volume()
        else:
            total += sum(piece.volume() for piece in set_difference(p, seen))
        seen.append(p)
    return total


# ---------------------------------------------------------------------------
# Linear preimages (pull a polytope in range space back through a matrix)
# ---------------------------------------------------------------------------

def preimage(p: Polytope, M, domain_box: Box) -> Polytope:
    """{u in domain_box : M u in p}, as a polytope in the domain space.

    The domain box keeps the preimage bounded when M is rank-deficient.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    m = M.shape[1]
    if domain_box.dim != m:
        raise GeometryError("domain box dimension mismatch")
    Hd = np.vstack([np.eye(m), -np.eye(m)])
    bd = np.concatenate([domain_box.hi, -domain_box.lo])
    if p.is_empty():
        return Polytope.empty(m)
    H, b = p.halfspaces()
    HM = H @ M
    norms = np.linalg.norm(HM, axis=1)
    ok = norms > 1e-12
    infeasible = (~ok) & (b < -FEAS_TOL)
    if np.any(infeasible):
        return Polytope.empty(m)
    return Polytope.from_halfspaces(
        np.vstack([HM[ok], Hd]), np.concatenate([b[ok], bd]), trusted=True
    )
