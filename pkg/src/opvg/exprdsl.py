"""Expression language for smooth algebra-valued functions on a chart.

Grammar (whitespace insignificant)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' signed-integer)?
    atom  := number | name | name '(' expr ')' | '(' expr ')'

A bare name is a coordinate or a constant; a name followed by ``(`` is a
function call.  A name may not be declared in two namespaces at once.

Evaluation is vectorized: coordinates may be arrays of any common shape
``S`` and the result has shape ``S + (N,)`` with the fiber axis last.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .algebra import AElem
from .errors import ArityError, DomainError, ExprSyntaxError, UnknownConstant, UnknownName

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "conj")


class Expr:
    """Base class of the AST.  Arithmetic operators build simplified trees."""

    __slots__ = ()

    def __add__(self, o):
        return add(self, _lift(o))

    def __radd__(self, o):
        return add(_lift(o), self)

    def __sub__(self, o):
        return sub(self, _lift(o))

    def __rsub__(self, o):
        return sub(_lift(o), self)

    def __mul__(self, o):
        return mul(self, _lift(o))

    def __rmul__(self, o):
        return mul(_lift(o), self)

    def __truediv__(self, o):
        return div(self, _lift(o))

    def __rtruediv__(self, o):
        return div(_lift(o), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return ipow(self, int(k))

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True, eq=True, repr=True)
class Coord(Expr):
    index: int
    name: str = ""


@dataclass(frozen=True)
class RealLit(Expr):
    value: float


@dataclass(frozen=True)
class AConst(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class IntPow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr


ZERO = RealLit(0.0)
ONE = RealLit(1.0)


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return RealLit(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def lit(v: float) -> RealLit:
    return RealLit(float(v))


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, RealLit) and e.value == v


# ---------------------------------------------------------------------------
# smart constructors (the light simplifier)


def add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, RealLit) and isinstance(b, RealLit):
        return RealLit(a.value + b.value)
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(a, RealLit) and isinstance(b, RealLit):
        return RealLit(a.value - b.value)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    if isinstance(a, RealLit) and isinstance(b, RealLit):
        return RealLit(a.value * b.value)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.arg, b.arg)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    if isinstance(a, RealLit) and isinstance(b, RealLit) and b.value != 0.0:
        return RealLit(a.value / b.value)
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, RealLit):
        return RealLit(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def ipow(b: Expr, k: int) -> Expr:
    if k == 0:
        return ONE
    if k == 1:
        return b
    if isinstance(b, RealLit) and (b.value != 0.0 or k > 0):
        return RealLit(b.value ** k)
    return IntPow(b, k)


def call(fn: str, a: Expr) -> Expr:
    if fn not in FUNCTIONS:
        raise UnknownName(fn)
    if isinstance(a, RealLit):
        if fn == "conj":
            return a
        if fn in ("sin", "tan", "sinh") and a.value == 0.0:
            return ZERO
        if fn in ("cos", "cosh", "exp") and a.value == 0.0:
            return ONE
    if fn == "conj" and isinstance(a, Call) and a.fn == "conj":
        return a.arg
    return Call(fn, a)


def sum_exprs(items) -> Expr:
    out: Expr = ZERO
    for e in items:
        out = add(out, e)
    return out


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)


def _tokenize(src: str):
    pos = 0
    out = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, coords: Sequence[str], constants):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.coords = {name: k for k, name in enumerate(coords)}
        self.constants = set(constants)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.take()
        if val != text or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            r = self.unary()
            e = Mul(e, r) if op == "*" else Div(e, r)
        return e

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sgn = 1
            if self.peek()[0] == "op" and self.peek()[1] in ("-", "+"):
                sgn = -1 if self.take()[1] == "-" else 1
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", pos)
            return IntPow(base, sgn * int(val))
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return RealLit(float(val))
        if kind == "name":
            is_call = self.peek()[0] == "op" and self.peek()[1] == "("
            if val in self.coords:
                if is_call:
                    raise ArityError(f"coordinate {val!r} is not a function (offset {pos})")
                return Coord(self.coords[val], val)
            if val in self.constants:
                if is_call:
                    raise ArityError(f"constant {val!r} is not a function (offset {pos})")
                return AConst(val)
            if val in FUNCTIONS:
                if not is_call:
                    raise ExprSyntaxError(f"function {val!r} needs a parenthesized argument", pos + len(val))
                self.take()
                if self.peek()[0] == "op" and self.peek()[1] == ")":
                    raise ArityError(f"{val} takes exactly one argument (offset {pos})")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise UnknownName(val, pos)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def check_namespaces(coords: Sequence[str], constants) -> None:
    names = list(coords) + list(constants)
    seen = set()
    for name in names:
        if name in seen or name in FUNCTIONS:
            raise ExprSyntaxError(f"name {name!r} is declared in more than one namespace", 0)
        seen.add(name)


def parse(src: str, coords: Sequence[str] = (), constants=()) -> Expr:
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    check_namespaces(coords, constants)
    return _Parser(src, coords, constants).parse()


# ---------------------------------------------------------------------------
# printer

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, IntPow: 4}


def _prec(e: Expr) -> int:
    if isinstance(e, RealLit) and (e.value < 0 or str(e.value).startswith("-")):
        return 3
    return _PREC.get(type(e), 5)


def _fmt_num(v: float) -> str:
    if not np.isfinite(v):
        raise ValueError(f"cannot print non-finite literal {v}")
    return repr(float(v))


def to_source(e: Expr, coords: Sequence[str] | None = None) -> str:
    """Source text that parses back to the same tree."""

    def name_of(c: Coord) -> str:
        if coords is not None:
            return coords[c.index]
        return c.name or f"x{c.index}"

    def go(e: Expr, need: int) -> str:
        p = _prec(e)
        if isinstance(e, Coord):
            s = name_of(e)
        elif isinstance(e, RealLit):
            s = _fmt_num(e.value)
        elif isinstance(e, AConst):
            s = e.name
        elif isinstance(e, (Add, Sub)):
            op = " + " if isinstance(e, Add) else " - "
            s = go(e.left, 1) + op + go(e.right, 2)
        elif isinstance(e, (Mul, Div)):
            op = "*" if isinstance(e, Mul) else "/"
            s = go(e.left, 2) + op + go(e.right, 3)
        elif isinstance(e, Neg):
            s = "-" + go(e.arg, 3)
        elif isinstance(e, IntPow):
            s = go(e.base, 5) + "^" + str(e.exponent)
        elif isinstance(e, Call):
            s = f"{e.fn}({go(e.arg, 0)})"
        else:
            raise TypeError(f"unknown node {e!r}")
        return f"({s})" if p < need else s

    return go(e, 0)


# ---------------------------------------------------------------------------
# differentiation


def diff(e: Expr, i: int) -> Expr:
    """Exact partial derivative with respect to coordinate i."""
    memo: dict[int, Expr] = {}

    def d(e: Expr) -> Expr:
        key = id(e)
        hit = memo.get(key)
        if hit is not None:
            return hit
        out = _d(e)
        memo[key] = out
        return out

    def _d(e: Expr) -> Expr:
        if isinstance(e, Coord):
            return ONE if e.index == i else ZERO
        if isinstance(e, (RealLit, AConst)):
            return ZERO
        if isinstance(e, Neg):
            return neg(d(e.arg))
        if isinstance(e, Add):
            return add(d(e.left), d(e.right))
        if isinstance(e, Sub):
            return sub(d(e.left), d(e.right))
        if isinstance(e, Mul):
            return add(mul(d(e.left), e.right), mul(e.left, d(e.right)))
        if isinstance(e, Div):
            num = d(e.left)
            den = d(e.right)
            first = div(num, e.right)
            if _is(den, 0.0):
                return first
            return sub(first, div(mul(e.left, den), ipow(e.right, 2)))
        if isinstance(e, IntPow):
            db = d(e.base)
            if _is(db, 0.0):
                return ZERO
            k = e.exponent
            return mul(mul(lit(k), ipow(e.base, k - 1)), db)
        if isinstance(e, Call):
            da = d(e.arg)
            if _is(da, 0.0):
                return ZERO
            a, fn = e.arg, e.fn
            if fn == "conj":
                return call("conj", da)
            if fn == "sin":
                outer = call("cos", a)
            elif fn == "cos":
                outer = neg(call("sin", a))
            elif fn == "tan":
                outer = ipow(call("cos", a), -2)
            elif fn == "exp":
                outer = e
            elif fn == "log":
                return div(da, a)
            elif fn == "sqrt":
                return div(da, mul(lit(2.0), e))
            elif fn == "sinh":
                outer = call("cosh", a)
            elif fn == "cosh":
                outer = call("sinh", a)
            else:
                raise UnknownName(fn)
            return mul(outer, da)
        raise TypeError(f"unknown node {e!r}")

    return d(e)


def substitute(e: Expr, repl: Mapping[int, Expr]) -> Expr:
    """Replace coordinates by expressions (composition f o G)."""
    memo: dict[int, Expr] = {}

    def go(e: Expr) -> Expr:
        key = id(e)
        if key in memo:
            return memo[key]
        if isinstance(e, Coord):
            out = repl.get(e.index, e)
        elif isinstance(e, (RealLit, AConst)):
            out = e
        elif isinstance(e, Neg):
            out = neg(go(e.arg))
        elif isinstance(e, Add):
            out = add(go(e.left), go(e.right))
        elif isinstance(e, Sub):
            out = sub(go(e.left), go(e.right))
        elif isinstance(e, Mul):
            out = mul(go(e.left), go(e.right))
        elif isinstance(e, Div):
            out = div(go(e.left), go(e.right))
        elif isinstance(e, IntPow):
            out = ipow(go(e.base), e.exponent)
        elif isinstance(e, Call):
            out = call(e.fn, go(e.arg))
        else:
            raise TypeError(f"unknown node {e!r}")
        memo[key] = out
        return out

    return go(e)


def walk(e: Expr):
    stack, seen = [e], set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        if isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.extend((node.left, node.right))
        elif isinstance(node, IntPow):
            stack.append(node.base)
        elif isinstance(node, Call):
            stack.append(node.arg)


def constants_used(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, AConst)}


def max_coord(e: Expr) -> int:
    return max((n.index for n in walk(e) if isinstance(n, Coord)), default=-1)


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalContext:
    """Coordinates (scalars or same-shape arrays) and the constant table."""

    coords: tuple
    constants: Mapping[str, AElem]
    fibers: int

    def __post_init__(self):
        for name, c in self.constants.items():
            if c.fibers != self.fibers:
                raise ValueError(f"constant {name!r} has {c.fibers} fibers, expected {self.fibers}")


def _real_positive(fn: str, v: np.ndarray) -> None:
    v = np.asarray(v)
    bad = (v.real <= 0) | (np.abs(v.imag) > 1e-10 * np.maximum(1.0, np.abs(v)))
    if np.any(bad):
        idx = np.argwhere(np.broadcast_to(bad, v.shape))[0]
        fiber = int(idx[-1]) if v.ndim else 0
        raise DomainError(fn, fiber, complex(v[tuple(idx)]) if v.ndim else complex(v))


def _nonzero(fn: str, v: np.ndarray) -> None:
    v = np.asarray(v)
    bad = v == 0
    if np.any(bad):
        idx = np.argwhere(np.broadcast_to(bad, v.shape))[0]
        fiber = int(idx[-1]) if v.ndim else 0
        raise DomainError(fn, fiber, 0.0)


_UFUNC = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "sinh": np.sinh, "cosh": np.cosh, "conj": np.conj,
}


def eval_array(e: Expr, ctx: EvalContext) -> np.ndarray:
    """Evaluate to a complex array of shape coord_shape + (N,)."""
    coords = [np.asarray(c, dtype=float) for c in ctx.coords]
    shape = np.broadcast_shapes(*(c.shape for c in coords)) if coords else ()
    cvals = {k: v.values for k, v in ctx.constants.items()}
    memo: dict[int, np.ndarray] = {}

    def go(e: Expr):
        key = id(e)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(e, Coord):
            if e.index >= len(coords):
                raise UnknownName(e.name or f"x{e.index}")
            out = coords[e.index][..., None]
        elif isinstance(e, RealLit):
            out = np.asarray(e.value)
        elif isinstance(e, AConst):
            if e.name not in cvals:
                raise UnknownConstant(e.name)
            out = cvals[e.name]
        elif isinstance(e, Neg):
            out = -go(e.arg)
        elif isinstance(e, Add):
            out = go(e.left) + go(e.right)
        elif isinstance(e, Sub):
            out = go(e.left) - go(e.right)
        elif isinstance(e, Mul):
            out = go(e.left) * go(e.right)
        elif isinstance(e, Div):
            den = go(e.right)
            _nonzero("/", den)
            out = go(e.left) / den
        elif isinstance(e, IntPow):
            b = go(e.base)
            if e.exponent < 0:
                _nonzero("^", b)
                out = (1.0 / b) ** (-e.exponent)
            else:
                out = b ** e.exponent
        elif isinstance(e, Call):
            a = go(e.arg)
            if e.fn in ("sqrt", "log"):
                _real_positive(e.fn, a)
                a = np.asarray(a).real
                out = (np.sqrt if e.fn == "sqrt" else np.log)(a).astype(complex)
            else:
                out = _UFUNC[e.fn](np.asarray(a, dtype=complex))
        else:
            raise TypeError(f"unknown node {e!r}")
        memo[key] = out
        return out

    val = go(e)
    return np.broadcast_to(np.asarray(val, dtype=complex), shape + (ctx.fibers,)).copy()


def evaluate(e: Expr, ctx: EvalContext) -> AElem:
    """Evaluate at a single point."""
    if any(np.ndim(c) for c in ctx.coords):
        raise ValueError("evaluate() takes scalar coordinates; use eval_array for batches")
    return AElem(eval_array(e, ctx))
