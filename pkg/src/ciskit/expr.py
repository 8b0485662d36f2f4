"""Math-expression AST over variables x1..xn with four evaluation modes.

Grammar (precedence high to low: ^, unary -, * /, + -):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' ['-'] INTEGER)?
    atom   := NUMBER | VARIABLE | FUNCTION '(' expr ')' | '(' expr ')'

Variables are ``x1, x2, ...`` (1-based); functions are sin, cos, tan, exp,
log, sqrt, abs.  Exponents must be integer literals.  Expressions are
immutable after parsing; every evaluator below is a pure function.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .intervals import Box, DomainError, Interval

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")


class ExprSyntaxError(ValueError):
    """Parse failure; carries the offending position in the source text."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written in the source


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


Expr = Num | Var | Neg | Call | Bin | Pow


def free_vars(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return free_vars(e.arg)
    if isinstance(e, Call):
        return free_vars(e.arg)
    if isinstance(e, Pow):
        return free_vars(e.base)
    return free_vars(e.lhs) | free_vars(e.rhs)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_VAR_RE = re.compile(r"^x([1-9]\d*)$")


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            if source[pos:].strip() == "":
                break
            raise ExprSyntaxError(f"unexpected character {source[pos:pos+1]!r}", pos)
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, tokens, n_vars):
        self.tokens = tokens
        self.i = 0
        self.n_vars = n_vars

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}, found {val!r}", pos)

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = Bin(val, node, self.parse_term())
            else:
                return node

    def parse_term(self):
        node = self.parse_unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = Bin(val, node, self.parse_unary())
            else:
                return node

    def parse_unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            sign = 1
            kind, val, pos = self.peek()
            if kind == "op" and val == "-":
                self.next()
                sign = -1
            kind, val, pos = self.next()
            if kind != "num" or not re.fullmatch(r"\d+", val):
                raise ExprSyntaxError("exponent must be an integer literal", pos)
            return Pow(base, sign * int(val))
        return base

    def parse_atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            m = _VAR_RE.match(val)
            if m:
                idx = int(m.group(1))
                if self.n_vars is not None and idx > self.n_vars:
                    raise ExprSyntaxError(
                        f"variable x{idx} exceeds declared dimension {self.n_vars}", pos
                    )
                return Var(idx)
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                kind2, val2, pos2 = self.peek()
                if kind2 == "op" and val2 == ",":
                    raise ExprSyntaxError(f"{val} takes exactly one argument", pos2)
                self.expect_op(")")
                return Call(val, arg)
            raise ExprSyntaxError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected token {val!r}", pos)


def parse(source: str, n_vars: int | None = None) -> Expr:
    """Parse an expression; optionally check variable indices against n_vars."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    p = _Parser(_tokenize(source), n_vars)
    node = p.parse_expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ExprSyntaxError(f"trailing input {val!r}", pos)
    return node


# ---------------------------------------------------------------------------
# Pretty printing (parse(to_string(e)) reproduces e structurally)
# ---------------------------------------------------------------------------

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _level(e: Expr) -> int:
    if isinstance(e, Bin):
        return _LEVEL_ADD if e.op in "+-" else _LEVEL_MUL
    if isinstance(e, Neg):
        return _LEVEL_NEG
    if isinstance(e, Pow):
        return _LEVEL_POW
    return _LEVEL_ATOM


def to_string(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Call):
        return f"{e.fn}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        if _level(e.arg) < _LEVEL_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_string(e.base)
        if _level(e.base) < _LEVEL_ATOM:
            base = f"({base})"
        return f"{base}^{e.exponent}"
    lhs, rhs = to_string(e.lhs), to_string(e.rhs)
    mine = _level(e)
    if _level(e.lhs) < mine:
        lhs = f"({lhs})"
    if _level(e.rhs) <= mine:  # ops are left-associative
        rhs = f"({rhs})"
    return f"{lhs} {e.op} {rhs}"


# ---------------------------------------------------------------------------
# Dual numbers (forward differentiation over floats or intervals)
# ---------------------------------------------------------------------------

class Dual:
    """Value plus gradient tuple; entries are floats or Intervals."""

    __slots__ = ("value", "grad")

    def __init__(self, value, grad):
        self.value = value
        self.grad = tuple(grad)

    def _coerce(self, other):
        if isinstance(other, Dual):
            return other
        return Dual(other, (0.0,) * len(self.grad))

    def __add__(self, other):
        o = self._coerce(other)
        return Dual(self.value + o.value, tuple(a + b for a, b in zip(self.grad, o.grad)))

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, tuple(-g for g in self.grad))

    def __sub__(self, other):
        o = self._coerce(other)
        return Dual(self.value - o.value, tuple(a - b for a, b in zip(self.grad, o.grad)))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return Dual(
            self.value * o.value,
            tuple(self.value * gb + o.value * ga for ga, gb in zip(self.grad, o.grad)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        _check_nonzero_denominator(o.value)
        v2sq = o.value**2
        return Dual(
            self.value / o.value,
            tuple(ga / o.value - (self.value * gb) / v2sq for ga, gb in zip(self.grad, o.grad)),
        )

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise DomainError("power requires an integer exponent")
        dv = k * self.value ** (k - 1) if k != 0 else 0.0
        return Dual(self.value**k, tuple(dv * g for g in self.grad))


def _check_nonzero_denominator(v):
    if isinstance(v, Interval):
        if v.lo <= 0.0 <= v.hi:
            raise DomainError(f"division by interval containing zero: {v}")
    elif isinstance(v, np.ndarray):
        if np.any(v == 0.0):
            raise DomainError("division by zero")
    elif v == 0.0:
        raise DomainError("division by zero")


# ---------------------------------------------------------------------------
# Elementary functions dispatched on operand type
# ---------------------------------------------------------------------------

def _chain(v: Dual, fval, dfactor) -> Dual:
    return Dual(fval, tuple(dfactor * g for g in v.grad))


def _sin(v):
    if isinstance(v, Dual):
        return _chain(v, _sin(v.value), _cos(v.value))
    if isinstance(v, Interval):
        return v.sin()
    if isinstance(v, np.ndarray):
        return np.sin(v)
    return math.sin(v)


def _cos(v):
    if isinstance(v, Dual):
        return _chain(v, _cos(v.value), -_sin(v.value))
    if isinstance(v, Interval):
        return v.cos()
    if isinstance(v, np.ndarray):
        return np.cos(v)
    return math.cos(v)


def _tan(v):
    if isinstance(v, Dual):
        t = _tan(v.value)
        return _chain(v, t, 1.0 + t * t)
    if isinstance(v, Interval):
        return v.tan()
    if isinstance(v, np.ndarray):
        return np.tan(v)
    return math.tan(v)


def _exp(v):
    if isinstance(v, Dual):
        ev = _exp(v.value)
        return _chain(v, ev, ev)
    if isinstance(v, Interval):
        return v.exp()
    if isinstance(v, np.ndarray):
        return np.exp(v)
    return math.exp(v)


def _log(v):
    if isinstance(v, Dual):
        return _chain(v, _log(v.value), 1.0 / v.value if not isinstance(v.value, Interval) else Interval(1.0, 1.0) / v.value)
    if isinstance(v, Interval):
        return v.log()
    if isinstance(v, np.ndarray):
        return np.log(v)
    if v <= 0.0:
        raise DomainError(f"log of non-positive value {v}")
    return math.log(v)


def _sqrt(v):
    if isinstance(v, Dual):
        s = _sqrt(v.value)
        if isinstance(s, Interval):
            if s.lo <= 0.0:
                raise DomainError("sqrt not differentiable at zero")
            return _chain(v, s, Interval(0.5, 0.5) / s)
        if s == 0.0:
            raise DomainError("sqrt not differentiable at zero")
        return _chain(v, s, 0.5 / s)
    if isinstance(v, Interval):
        return v.sqrt()
    if isinstance(v, np.ndarray):
        return np.sqrt(v)
    if v < 0.0:
        raise DomainError(f"sqrt of negative value {v}")
    return math.sqrt(v)


def _abs(v):
    if isinstance(v, Dual):
        iv = v.value
        if isinstance(iv, Interval):
            if iv.lo > 0.0:
                sign = 1.0
            elif iv.hi < 0.0:
                sign = -1.0
            else:
                # derivative enclosure across the kink; sound wherever defined
                sign = Interval(-1.0, 1.0)
        else:
            if iv == 0.0:
                raise DomainError("abs not differentiable at zero")
            sign = 1.0 if iv > 0.0 else -1.0
        return _chain(v, _abs(iv), sign)
    if isinstance(v, Interval):
        return v.abs()
    if isinstance(v, np.ndarray):
        return np.abs(v)
    return abs(v)


_FN = {"sin": _sin, "cos": _cos, "tan": _tan, "exp": _exp, "log": _log, "sqrt": _sqrt, "abs": _abs}


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _eval(e: Expr, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.index > len(env):
            raise ValueError(f"variable x{e.index} is unbound (only {len(env)} bindings)")
        return env[e.index - 1]
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Call):
        return _FN[e.fn](_eval(e.arg, env))
    if isinstance(e, Pow):
        return _eval(e.base, env) ** e.exponent
    a = _eval(e.lhs, env)
    b = _eval(e.rhs, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    _check_nonzero_denominator(b)
    return a / b


def eval_real(e: Expr, x) -> float:
    """IEEE-double point evaluation; x is a vector of variable values."""
    return float(_eval(e, [float(v) for v in np.asarray(x, dtype=float)]))


def eval_real_many(e: Expr, pts: np.ndarray) -> np.ndarray:
    """Vectorized evaluation over rows of pts (shape (k, n))."""
    pts = np.asarray(pts, dtype=float)
    out = _eval(e, [pts[:, j] for j in range(pts.shape[1])])
    return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

def eval_interval(e: Expr, box: Box) -> Interval:
    """Natural interval extension: sound enclosure of e over the box."""
    env = [box.interval(i) for i in range(box.dim)]
    out = _eval(e, env)
    return out if isinstance(out, Interval) else Interval(out, out)


def eval_gradient(e: Expr, x) -> np.ndarray:
    """Forward-mode gradient at a point (errors at non-differentiable points)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    env = [Dual(float(x[j]), tuple(1.0 if k == j else 0.0 for k in range(n))) for j in range(n)]
    out = _eval(e, env)
    if not isinstance(out, Dual):
        return np.zeros(n)
    return np.array(out.grad, dtype=float)


def eval_gradient_interval(e: Expr, box: Box) -> Box:
    """Interval enclosure of the gradient over the box (one interval per variable)."""
    n = box.dim
    zero = Interval(0.0, 0.0)
    one = Interval(1.0, 1.0)
    env = [
        Dual(box.interval(j), tuple(one if k == j else zero for k in range(n)))
        for j in range(n)
    ]
    out = _eval(e, env)
    if not isinstance(out, Dual):
        return Box.from_intervals([zero] * n)
    return Box.from_intervals(
        [g if isinstance(g, Interval) else Interval(g, g) for g in out.grad]
    )


def eval_interval_mean_value(e: Expr, box: Box) -> Interval:
    """Mean-value form: value at the midpoint plus interval-gradient deviation.

    Sound alternative to the natural extension; tighter on small boxes when
    the expression has strong variable dependency.
    """
    mid = box.midpoint()
    c = eval_real(e, mid)
    grad = eval_gradient_interval(e, box)
    half = 0.5 * box.widths()
    acc = Interval(c, c)
    for j in range(box.dim):
        acc = acc + grad.interval(j) * Interval(-half[j], half[j])
    return acc


# ---------------------------------------------------------------------------
# Width-growth constants for the natural extension
# ---------------------------------------------------------------------------

def width_growth_constants(e: Expr, box: Box) -> np.ndarray:
    """Per-variable constants c with w([e]([y])) <= sum_j c_j * w([y]_j)
    for every sub-box [y] of the given box, where [e] is the natural
    extension.  Conservative Lipschitz-style bounds built bottom-up from
    interval range enclosures; raises DomainError when a sub-operation has
    an unbounded slope on the box (sqrt at 0, division near 0, ...).
    """
    rng, lam = _width_rec(e, box)
    return lam


def _width_rec(e: Expr, box: Box):
    n = box.dim
    if isinstance(e, Num):
        return Interval(e.value, e.value), np.zeros(n)
    if isinstance(e, Var):
        lam = np.zeros(n)
        lam[e.index - 1] = 1.0
        return box.interval(e.index - 1), lam
    if isinstance(e, Neg):
        rng, lam = _width_rec(e.arg, box)
        return -rng, lam
    if isinstance(e, Bin):
        ra, la = _width_rec(e.lhs, box)
        rb, lb = _width_rec(e.rhs, box)
        if e.op == "+":
            return ra + rb, la + lb
        if e.op == "-":
            return ra - rb, la + lb
        if e.op == "*":
            return ra * rb, rb.mag() * la + ra.mag() * lb
        if rb.mig() == 0.0:
            raise DomainError(f"division slope unbounded: denominator range {rb}")
        return ra / rb, la / rb.mig() + (ra.mag() / rb.mig() ** 2) * lb
    if isinstance(e, Pow):
        ra, la = _width_rec(e.base, box)
        k = e.exponent
        if k == 0:
            return Interval(1.0, 1.0), np.zeros(n)
        if k > 0:
            return ra**k, k * ra.mag() ** (k - 1) * la
        if ra.mig() == 0.0:
            raise DomainError(f"negative power slope unbounded: base range {ra}")
        m = -k
        lam_pos = m * ra.mag() ** (m - 1) * la
        return ra**k, lam_pos / ra.mig() ** (2 * m)
    # Call
    ra, la = _width_rec(e.arg, box)
    fn = e.fn
    if fn == "sin":
        return ra.sin(), ra.cos().mag() * la
    if fn == "cos":
        return ra.cos(), ra.sin().mag() * la
    if fn == "tan":
        t = ra.tan()
        return t, (1.0 + t.mag() ** 2) * la
    if fn == "exp":
        r = ra.exp()
        return r, r.mag() * la
    if fn == "log":
        r = ra.log()
        return r, la / ra.mig()
    if fn == "sqrt":
        r = ra.sqrt()
        if ra.mig() == 0.0:
            raise DomainError("sqrt slope unbounded at zero")
        return r, la / (2.0 * math.sqrt(ra.mig()))
    # abs: Lipschitz constant 1
    return ra.abs(), la
