"""Algebra-valued vector fields, covariant tensors and differential forms on one chart.

Components are `Expr` trees in the chart coordinates.  Forms use the
determinant convention: dx^I evaluated on (d/dx^{i1}, ..., d/dx^{ik}) is 1,
and interior products contract the first slot.
"""

from __future__ import annotations

from itertools import product
from typing import Mapping, Sequence

import numpy as np

from . import exprdsl as ex
from .errors import DegreeZero, DimMismatch
from .exterior import basis, sort_sign
from .exprdsl import Expr


class AVectorField:
    __slots__ = ("components",)

    def __init__(self, components: Sequence[Expr]):
        self.components = tuple(ex._lift(c) for c in components)

    @classmethod
    def coordinate(cls, n: int, i: int) -> "AVectorField":
        return cls([ex.ONE if j == i else ex.ZERO for j in range(n)])

    @property
    def dim(self) -> int:
        return len(self.components)

    def __getitem__(self, i) -> Expr:
        return self.components[i]

    def scale(self, f: Expr) -> "AVectorField":
        return AVectorField([ex.mul(f, c) for c in self.components])

    def __add__(self, other: "AVectorField") -> "AVectorField":
        _same_dim(self, other)
        return AVectorField([ex.add(a, b) for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "AVectorField") -> "AVectorField":
        _same_dim(self, other)
        return AVectorField([ex.sub(a, b) for a, b in zip(self.components, other.components)])

    def evaluate(self, ctx: ex.EvalContext) -> np.ndarray:
        return np.stack([ex.eval_array(c, ctx) for c in self.components])

    def __repr__(self):
        return f"AVectorField({[str(c) for c in self.components]})"


class AFormField:
    __slots__ = ("dim", "degree", "components")

    def __init__(self, dim: int, degree: int, components: Mapping[tuple[int, ...], Expr] | None = None):
        if not 0 <= degree <= dim:
            raise ValueError(f"degree {degree} outside [0, {dim}]")
        self.dim = dim
        self.degree = degree
        comps: dict[tuple[int, ...], Expr] = {}
        for key, e in (components or {}).items():
            key = tuple(int(i) for i in key)
            if len(key) != degree or any(i < 0 or i >= dim for i in key):
                raise ValueError(f"bad index tuple {key} for a {degree}-form in dimension {dim}")
            s, skey = sort_sign(key)
            if s == 0:
                continue
            term = ex._lift(e) if s > 0 else ex.neg(ex._lift(e))
            comps[skey] = ex.add(comps[skey], term) if skey in comps else term
        self.components = {k: comps.get(k, ex.ZERO) for k in basis(dim, degree)}

    @classmethod
    def scalar(cls, dim: int, f: Expr) -> "AFormField":
        return cls(dim, 0, {(): f})

    def __getitem__(self, key) -> Expr:
        s, skey = sort_sign(tuple(key))
        if s == 0:
            return ex.ZERO
        e = self.components[skey]
        return e if s > 0 else ex.neg(e)

    def scale(self, f: Expr) -> "AFormField":
        return AFormField(self.dim, self.degree, {k: ex.mul(f, e) for k, e in self.components.items()})

    def __add__(self, other: "AFormField") -> "AFormField":
        _same_form(self, other)
        return AFormField(self.dim, self.degree,
                          {k: ex.add(e, other.components[k]) for k, e in self.components.items()})

    def __sub__(self, other: "AFormField") -> "AFormField":
        _same_form(self, other)
        return AFormField(self.dim, self.degree,
                          {k: ex.sub(e, other.components[k]) for k, e in self.components.items()})

    def evaluate(self, ctx: ex.EvalContext) -> np.ndarray:
        """Coefficient array (C(n,k), *shape, N) in lexicographic basis order."""
        return np.stack([ex.eval_array(self.components[k], ctx) for k in basis(self.dim, self.degree)])

    def to_tensor(self) -> "ATensorField":
        comps = {}
        for idx in product(range(self.dim), repeat=self.degree):
            comps[idx] = self[idx]
        return ATensorField(self.dim, self.degree, comps)

    def __repr__(self):
        nz = {k: str(e) for k, e in self.components.items() if not ex._is(e, 0.0)}
        return f"AFormField(degree={self.degree}, {nz})"


class ATensorField:
    """Covariant tensor of order k with dense components T_{j1...jk}."""

    __slots__ = ("dim", "order", "components")

    def __init__(self, dim: int, order: int, components: Mapping[tuple[int, ...], Expr] | None = None):
        self.dim = dim
        self.order = order
        comps = components or {}
        self.components = {idx: ex._lift(comps.get(idx, ex.ZERO))
                           for idx in product(range(dim), repeat=order)}

    def apply(self, fields: Sequence[AVectorField]) -> Expr:
        """T(Y1, ..., Yk), linear over the function algebra in every slot."""
        if len(fields) != self.order:
            raise DimMismatch(f"tensor of order {self.order} applied to {len(fields)} fields")
        for Y in fields:
            if Y.dim != self.dim:
                raise DimMismatch("field dimension does not match tensor dimension")
        terms = []
        for idx, t in self.components.items():
            if ex._is(t, 0.0):
                continue
            term = t
            for Y, j in zip(fields, idx):
                term = ex.mul(term, Y[j])
            terms.append(term)
        return ex.sum_exprs(terms)

    def to_form(self) -> AFormField:
        return AFormField(self.dim, self.order, {k: self.components[k] for k in basis(self.dim, self.order)})

    def evaluate(self, ctx: ex.EvalContext) -> dict[tuple[int, ...], np.ndarray]:
        return {k: ex.eval_array(e, ctx) for k, e in self.components.items()}


def _same_dim(X: AVectorField, Y: AVectorField) -> None:
    if X.dim != Y.dim:
        raise DimMismatch(f"vector fields of dimension {X.dim} and {Y.dim}")


def _same_form(a: AFormField, b: AFormField) -> None:
    if (a.dim, a.degree) != (b.dim, b.degree):
        raise DimMismatch("forms of different dimension or degree")


def apply_vf(X: AVectorField, f: Expr, dim: int | None = None) -> Expr:
    """X(f) = sum_i X^i df/dx^i."""
    if dim is not None and X.dim != dim:
        raise DimMismatch(f"field has dimension {X.dim}, chart has {dim}")
    if ex.max_coord(f) >= X.dim:
        raise DimMismatch("function uses a coordinate beyond the field's dimension")
    return ex.sum_exprs(ex.mul(X[i], ex.diff(f, i)) for i in range(X.dim))


def lie_bracket(X: AVectorField, Y: AVectorField) -> AVectorField:
    _same_dim(X, Y)
    n = X.dim
    return AVectorField([
        ex.sub(apply_vf(X, Y[j]), apply_vf(Y, X[j])) for j in range(n)
    ])


def conj_expr(e: Expr) -> Expr:
    """conj(e), dropped when e has no algebra constants (coordinates are real)."""
    if not ex.constants_used(e):
        return e
    return ex.call("conj", e)


def involution_field(X: AVectorField) -> AVectorField:
    return AVectorField([conj_expr(c) for c in X.components])


def involution_form(w: AFormField) -> AFormField:
    return AFormField(w.dim, w.degree, {k: conj_expr(e) for k, e in w.components.items()})


def involution_function(f: Expr) -> Expr:
    return conj_expr(f)


def d(w: AFormField) -> AFormField:
    """Exterior derivative; a top-degree form maps to the zero top form."""
    n, k = w.dim, w.degree
    if k == n:
        return AFormField(n, n)
    out: dict[tuple[int, ...], Expr] = {}
    for I, coeff in w.components.items():
        if ex._is(coeff, 0.0):
            continue
        for i in range(n):
            s, key = sort_sign((i,) + I)
            if s == 0:
                continue
            term = ex.diff(coeff, i)
            if ex._is(term, 0.0):
                continue
            term = term if s > 0 else ex.neg(term)
            out[key] = ex.add(out[key], term) if key in out else term
    return AFormField(n, k + 1, out)


def exact(f: Expr, dim: int) -> AFormField:
    return d(AFormField.scalar(dim, f))


def wedge(a: AFormField, b: AFormField) -> AFormField:
    if a.dim != b.dim:
        raise DimMismatch("forms on charts of different dimension")
    n, k = a.dim, a.degree + b.degree
    if k > n:
        return AFormField(n, n)
    out: dict[tuple[int, ...], Expr] = {}
    for I, ea in a.components.items():
        if ex._is(ea, 0.0):
            continue
        for J, eb in b.components.items():
            if ex._is(eb, 0.0):
                continue
            s, key = sort_sign(I + J)
            if s == 0:
                continue
            term = ex.mul(ea, eb)
            term = term if s > 0 else ex.neg(term)
            out[key] = ex.add(out[key], term) if key in out else term
    return AFormField(n, k, out)


def interior(X: AVectorField, w: AFormField) -> AFormField:
    """i_X w, contracting the first slot."""
    if w.degree == 0:
        raise DegreeZero("interior product of a 0-form")
    if X.dim != w.dim:
        raise DimMismatch("field and form dimensions differ")
    n, k = w.dim, w.degree
    out = {}
    for J in basis(n, k - 1):
        out[J] = ex.sum_exprs(ex.mul(X[i], w[(i,) + J]) for i in range(n) if i not in J)
    return AFormField(n, k - 1, out)


def lie_derivative(X: AVectorField, T: ATensorField) -> ATensorField:
    """Components of L_X T on coordinate fields.

    (L_X T)(d_J) = X(T_J) - sum_m T(..., [X, d_{j_m}], ...), and
    [X, d_j] = -(d_j X^i) d_i for coordinate fields d_j.
    """
    if X.dim != T.dim:
        raise DimMismatch("field and tensor dimensions differ")
    n = T.dim
    dX = [[ex.diff(X[i], j) for i in range(n)] for j in range(n)]  # dX[j][i] = d_j X^i
    out = {}
    for J, t in T.components.items():
        terms = [apply_vf(X, t)]
        for m, jm in enumerate(J):
            for i in range(n):
                if ex._is(dX[jm][i], 0.0):
                    continue
                K = J[:m] + (i,) + J[m + 1:]
                terms.append(ex.mul(dX[jm][i], T.components[K]))
        out[J] = ex.sum_exprs(terms)
    return ATensorField(n, T.order, out)


def cartan_rhs(X: AVectorField, w: AFormField) -> AFormField:
    """d(i_X w) + i_X(dw)."""
    first = d(interior(X, w)) if w.degree > 0 else AFormField(w.dim, w.degree)
    second = interior(X, d(w)) if w.degree < w.dim else AFormField(w.dim, w.degree)
    return first + second
