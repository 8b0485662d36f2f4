"""Scalar intervals, boxes (multidimensional intervals) and finite box unions.

All widths and ball radii use the infinity norm, so erosion and bisection
stay axis-aligned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Evaluation hit a singularity (division by zero, log of non-positive, ...)."""


# Relative outward inflation applied after transcendental interval ops, where
# libm rounding direction is unknown.  Documented soundness epsilon; exact
# IEEE ops (+,-,*,/) are left uninflated.
OUT_EPS = 1e-12

_TWO_PI = 2.0 * math.pi


def _inflate(lo: float, hi: float) -> tuple[float, float]:
    return lo - abs(lo) * OUT_EPS, hi + abs(hi) * OUT_EPS


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with lo <= hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    # -- queries ---------------------------------------------------------
    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.hi + self.lo)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def mag(self) -> float:
        """sup |x| over the interval."""
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        """inf |x| over the interval."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    # -- arithmetic ------------------------------------------------------
    @staticmethod
    def _coerce(x) -> "Interval":
        if isinstance(x, Interval):
            return x
        return Interval(float(x), float(x))

    def __add__(self, other):
        o = Interval._coerce(other)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        o = Interval._coerce(other)
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, other):
        return Interval._coerce(other) - self

    def __mul__(self, other):
        o = Interval._coerce(other)
        c = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(min(c), max(c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Interval._coerce(other)
        if o.lo <= 0.0 <= o.hi:
            raise DomainError(f"division by interval containing zero: [{o.lo}, {o.hi}]")
        return self * Interval(1.0 / o.hi, 1.0 / o.lo)

    def __rtruediv__(self, other):
        return Interval._coerce(other) / self

    def __pow__(self, k):
        if not isinstance(k, int):
            raise DomainError("interval power requires an integer exponent")
        if k < 0:
            return 1.0 / self.__pow__(-k)
        if k == 0:
            return Interval(1.0, 1.0)
        if k % 2 == 1:
            return Interval(self.lo**k, self.hi**k)
        lo, hi = self.mig() ** k, self.mag() ** k
        return Interval(lo, hi)

    # -- elementary functions (outward-rounded ranges) --------------------
    def _has_crit(self, offset: float) -> bool:
        # does [lo, hi] contain a point = offset (mod 2*pi)?
        k = math.ceil((self.lo - offset) / _TWO_PI)
        return offset + k * _TWO_PI <= self.hi

    def sin(self) -> "Interval":
        lo = min(math.sin(self.lo), math.sin(self.hi))
        hi = max(math.sin(self.lo), math.sin(self.hi))
        if self._has_crit(0.5 * math.pi):
            hi = 1.0
        if self._has_crit(-0.5 * math.pi):
            lo = -1.0
        lo, hi = _inflate(lo, hi)
        return Interval(max(lo, -1.0), min(hi, 1.0))

    def cos(self) -> "Interval":
        lo = min(math.cos(self.lo), math.cos(self.hi))
        hi = max(math.cos(self.lo), math.cos(self.hi))
        if self._has_crit(0.0):
            hi = 1.0
        if self._has_crit(math.pi):
            lo = -1.0
        lo, hi = _inflate(lo, hi)
        return Interval(max(lo, -1.0), min(hi, 1.0))

    def tan(self) -> "Interval":
        # reject intervals straddling a pole pi/2 + k*pi
        k = math.ceil((self.lo - 0.5 * math.pi) / math.pi)
        if 0.5 * math.pi + k * math.pi <= self.hi:
            raise DomainError(f"tan over interval containing a pole: [{self.lo}, {self.hi}]")
        return Interval(*_inflate(math.tan(self.lo), math.tan(self.hi)))

    def exp(self) -> "Interval":
        return Interval(*_inflate(math.exp(self.lo), math.exp(self.hi)))

    def log(self) -> "Interval":
        if self.lo <= 0.0:
            raise DomainError(f"log over interval touching non-positive reals: [{self.lo}, {self.hi}]")
        return Interval(*_inflate(math.log(self.lo), math.log(self.hi)))

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise DomainError(f"sqrt over interval with negative part: [{self.lo}, {self.hi}]")
        return Interval(*_inflate(math.sqrt(self.lo), math.sqrt(self.hi)))

    def abs(self) -> "Interval":
        return Interval(self.mig(), self.mag())

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __repr__(self):
        return f"[{self.lo}, {self.hi}]"


class Box:
    """Compact axis-aligned box in R^n, stored as lo/hi float vectors."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size < 1:
            raise ValueError("lo/hi must be equal-length vectors")
        if np.any(lo > hi):
            raise ValueError(f"invalid box: lo {lo} exceeds hi {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo = lo
        self.hi = hi

    @classmethod
    def from_intervals(cls, ivs) -> "Box":
        return cls([iv.lo for iv in ivs], [iv.hi for iv in ivs])

    @property
    def dim(self) -> int:
        return self.lo.size

    def interval(self, i: int) -> Interval:
        return Interval(self.lo[i], self.hi[i])

    def width(self) -> float:
        """Infinity-norm width max_i (hi_i - lo_i)."""
        return float(np.max(self.hi - self.lo))

    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.hi + self.lo)

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def bisect(self) -> tuple["Box", "Box"]:
        """Split at the midpoint of the widest dimension (ties: lowest index)."""
        w = self.hi - self.lo
        if np.max(w) <= 0.0:
            raise ValueError("cannot bisect a zero-width box")
        d = int(np.argmax(w))
        m = 0.5 * (self.lo[d] + self.hi[d])
        left_hi = self.hi.copy()
        left_hi[d] = m
        right_lo = self.lo.copy()
        right_lo[d] = m
        return Box(self.lo, left_hi), Box(right_lo, self.hi)

    def contains_point(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def intersects(self, other: "Box") -> bool:
        self._check_dim(other)
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    def intersection(self, other: "Box"):
        """Intersection box, or None when disjoint."""
        self._check_dim(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return Box(lo, hi)

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        self._check_dim(other)
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def corners(self) -> np.ndarray:
        """All 2^n corner points, shape (2^n, n)."""
        n = self.dim
        out = np.empty((1 << n, n))
        for i in range(1 << n):
            for d in range(n):
                out[i, d] = self.hi[d] if (i >> d) & 1 else self.lo[d]
        return out

    def shrink(self, r: float):
        """Pontryagin difference with the inf-norm ball B_r; None if it vanishes."""
        lo, hi = self.lo + r, self.hi - r
        if np.any(lo > hi):
            return None
        return Box(lo, hi)

    def _check_dim(self, other: "Box"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def same_as(self, other: "Box") -> bool:
        return bool(np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    def to_json(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Box":
        return cls(d["lo"], d["hi"])

    def __repr__(self):
        parts = "x".join(f"[{a:g},{b:g}]" for a, b in zip(self.lo, self.hi))
        return f"Box({parts})"


def box_difference(a: Box, b: Box) -> list[Box]:
    """Exact closed cover of a \\ b as interior-disjoint boxes (at most 2n)."""
    c = a.intersection(b)
    if c is None:
        return [a]
    pieces: list[Box] = []
    cur_lo, cur_hi = a.lo.copy(), a.hi.copy()
    for d in range(a.dim):
        if c.lo[d] > cur_lo[d]:
            hi = cur_hi.copy()
            hi[d] = c.lo[d]
            pieces.append(Box(cur_lo.copy(), hi))
            cur_lo[d] = c.lo[d]
        if c.hi[d] < cur_hi[d]:
            lo = cur_lo.copy()
            lo[d] = c.hi[d]
            pieces.append(Box(lo, cur_hi.copy()))
            cur_hi[d] = c.hi[d]
    return pieces


class BoxUnion:
    """Finite union of same-dimension boxes with a mutation version counter.

    `subtract` and `erode` mutate in place and bump `version` whenever the
    box list changes; algorithm check-marks key off that counter.
    """

    def __init__(self, boxes, version: int = 0):
        boxes = list(boxes)
        if boxes:
            n = boxes[0].dim
            for b in boxes:
                if b.dim != n:
                    raise ValueError("mixed dimensions in box union")
        self.boxes = boxes
        self.version = version
        self._stack = None

    @property
    def dim(self) -> int:
        if not self.boxes:
            raise ValueError("empty union has no dimension")
        return self.boxes[0].dim

    def is_empty(self) -> bool:
        return not self.boxes

    def copy(self) -> "BoxUnion":
        return BoxUnion(list(self.boxes), self.version)

    def _stacked(self):
        if self._stack is None:
            los = np.array([b.lo for b in self.boxes])
            his = np.array([b.hi for b in self.boxes])
            self._stack = (los, his)
        return self._stack

    def _touch(self):
        self.version += 1
        self._stack = None

    def indices_intersecting(self, lo, hi) -> np.ndarray:
        """Indices of member boxes whose closure meets the box [lo, hi]."""
        if not self.boxes:
            return np.empty(0, dtype=int)
        los, his = self._stacked()
        mask = np.all(los <= hi, axis=1) & np.all(lo <= his, axis=1)
        return np.nonzero(mask)[0]

    def contains_point(self, p, tol: float = 0.0) -> bool:
        if not self.boxes:
            return False
        los, his = self._stacked()
        p = np.asarray(p, dtype=float)
        return bool(np.any(np.all(p >= los - tol, axis=1) & np.all(p <= his + tol, axis=1)))

    def subtract(self, b: Box) -> bool:
        """Remove box b (exact set difference); returns True if anything changed."""
        changed = False
        out: list[Box] = []
        for box in self.boxes:
            if box.intersects(b):
                pieces = box_difference(box, b)
                if len(pieces) != 1 or pieces[0] is not box:
                    changed = True
                out.extend(pieces)
            else:
                out.append(box)
        if changed:
            self.boxes = out
            self._touch()
        return changed

    def erode(self, r: float) -> None:
        """Shrink every box by r per face (inf-norm Pontryagin under-approximation).

        Each surviving point keeps inf-distance >= r from the complement since
        its shrunk box certifies a full B_r neighbourhood inside the union.
        """
        if r < 0:
            raise ValueError("erosion radius must be nonnegative")
        if r == 0:
            return
        out = []
        for box in self.boxes:
            s = box.shrink(r)
            if s is not None:
                out.append(s)
        self.boxes = out
        self._touch()

    def eroded(self, r: float) -> "BoxUnion":
        u = self.copy()
        u.erode(r)
        return u

    def disjoint_pieces(self) -> list[Box]:
        """Interior-disjoint refinement covering the same point set."""
        pieces: list[Box] = []
        for box in self.boxes:
            frags = [box]
            for q in pieces:
                nxt = []
                for f in frags:
                    nxt.extend(box_difference(f, q))
                frags = nxt
                if not frags:
                    break
            pieces.extend(frags)
        return pieces

    def volume(self) -> float:
        """Exact union volume (overlaps handled by disjoint refinement)."""
        return float(sum(p.volume() for p in self.disjoint_pieces()))

    def bounding_box(self):
        if not self.boxes:
            return None
        los, his = self._stacked()
        return Box(los.min(axis=0), his.max(axis=0))

    def same_as(self, other: "BoxUnion") -> bool:
        """Exact equality of box lists up to ordering."""
        if len(self.boxes) != len(other.boxes):
            return False
        key = lambda b: tuple(b.lo) + tuple(b.hi)
        return all(
            x.same_as(y)
            for x, y in zip(sorted(self.boxes, key=key), sorted(other.boxes, key=key))
        )

    def to_json(self) -> list:
        return [b.to_json() for b in self.boxes]

    @classmethod
    def from_json(cls, arr) -> "BoxUnion":
        return cls([Box.from_json(d) for d in arr])

    def __len__(self):
        return len(self.boxes)

    def __iter__(self):
        return iter(self.boxes)

    def __repr__(self):
        return f"BoxUnion({len(self.boxes)} boxes, version={self.version})"


class IntervalMatrix:
    """Dense matrix of intervals, stored as lo/hi arrays of equal shape."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 2:
            raise ValueError("lo/hi must be equal-shape 2-D arrays")
        if np.any(lo > hi):
            raise ValueError("interval matrix with lo > hi")
        self.lo = lo
        self.hi = hi

    @classmethod
    def exact(cls, m) -> "IntervalMatrix":
        m = np.asarray(m, dtype=float)
        return cls(m, m.copy())

    @property
    def shape(self):
        return self.lo.shape

    def width(self) -> np.ndarray:
        return self.hi - self.lo


def interval_matrix_times_box(m: IntervalMatrix, u: Box) -> Box:
    """Sound enclosure of {M v : M in m, v in u} as a box in R^n.

    Entrywise interval products followed by interval row sums.
    """
    if m.shape[1] != u.dim:
        raise ValueError(f"dimension mismatch: matrix {m.shape} vs box dim {u.dim}")
    cands = np.stack(
        [
            m.lo * u.lo[None, :],
            m.lo * u.hi[None, :],
            m.hi * u.lo[None, :],
            m.hi * u.hi[None, :],
        ]
    )
    lo = cands.min(axis=0).sum(axis=1)
    hi = cands.max(axis=0).sum(axis=1)
    return Box(lo, hi)
