"""Fiberwise (Pettis) integration over boxes with composite Gauss-Legendre rules."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import exprdsl as ex
from .algebra import AElem
from .domain import BoxDomain
from .errors import DimMismatch, SupportViolation, WrongDegree
from .exprdsl import Expr
from .exterior import basis
from .fields import AFormField, d, wedge
from .geometry import MetricField, codifferential, expr_det, hodge_form

__all__ = [
    "BoxDomain", "Quadrature", "Functional", "pettis_integral", "functional_quadrature",
    "integrate_form", "pullback_form", "change_of_variables_check", "stokes_residual",
    "form_pairing", "form_pairing_inner", "adjointness_residual",
]

SUPPORT_TOL = 1e-8


@lru_cache(maxsize=None)
def _leggauss(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(m)


@dataclass(frozen=True)
class Quadrature:
    m: int = 8
    s: int = 4

    def __post_init__(self):
        if self.m < 2 or self.s < 1:
            raise ValueError(f"need m >= 2 and s >= 1, got m={self.m}, s={self.s}")

    @classmethod
    def parse(cls, text: str) -> "Quadrature":
        m, s = (int(t) for t in text.split(","))
        return cls(m, s)

    def rule_1d(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        x, w = _leggauss(self.m)
        edges = np.linspace(a, b, self.s + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return nodes, weights

    def rule(self, intervals: Sequence[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
        """Tensor-product nodes (P, n) and weights (P,)."""
        if not intervals:
            return np.zeros((1, 0)), np.ones(1)
        rules = [self.rule_1d(a, b) for a, b in intervals]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        w = np.prod(np.stack([g.ravel() for g in wgrids]), axis=0)
        return pts, w


@dataclass(frozen=True)
class Functional:
    """A linear functional on C(X): a -> sum_x w_x a(x)."""

    weights: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(complex(w) for w in self.weights))

    def __call__(self, a) -> complex | np.ndarray:
        v = a.values if isinstance(a, AElem) else np.asarray(a)
        if v.shape[-1] != len(self.weights):
            raise DimMismatch("functional and element have different fiber counts")
        return v @ np.asarray(self.weights)


def _context(points: np.ndarray, constants: Mapping[str, AElem], fibers: int,
             metric: MetricField | None) -> ex.EvalContext:
    if metric is not None:
        return metric.context(points)
    return ex.EvalContext(tuple(points[:, i] for i in range(points.shape[1])), dict(constants), fibers)


def _infer_fibers(constants: Mapping[str, AElem] | None, fibers: int | None) -> int:
    if fibers is not None:
        return fibers
    for c in (constants or {}).values():
        return c.fibers
    return 1


def _quad_values(vals: np.ndarray, w: np.ndarray) -> np.ndarray:
    # fixed contraction order keeps sums reproducible
    return np.einsum("p,p...->...", w, vals)


def pettis_integral(f: Expr, dom: BoxDomain, q: Quadrature = Quadrature(),
                    constants: Mapping[str, AElem] | None = None, fibers: int | None = None,
                    metric: MetricField | None = None) -> AElem:
    N = metric.fibers if metric is not None else _infer_fibers(constants, fibers)
    pts, w = q.rule(dom.intervals)
    vals = ex.eval_array(f, _context(pts, constants or {}, N, metric))
    return AElem(_quad_values(vals, w))


def functional_quadrature(f: Expr, lam: Functional, dom: BoxDomain, q: Quadrature = Quadrature(),
                          constants: Mapping[str, AElem] | None = None,
                          fibers: int | None = None) -> complex:
    """Quadrature of the scalar function lam o f."""
    N = _infer_fibers(constants, fibers)
    pts, w = q.rule(dom.intervals)
    scalar = lam(ex.eval_array(f, _context(pts, constants or {}, N, None)))
    return complex(_quad_values(scalar, w))


def _top(w: AFormField) -> Expr:
    if w.degree != w.dim:
        raise WrongDegree(f"expected a {w.dim}-form, got degree {w.degree}")
    return w.components[tuple(range(w.dim))]


def integrate_form(w: AFormField, dom: BoxDomain, q: Quadrature = Quadrature(),
                   constants: Mapping[str, AElem] | None = None, fibers: int | None = None,
                   metric: MetricField | None = None) -> AElem:
    if w.dim != dom.dim:
        raise DimMismatch("form and domain dimensions differ")
    return pettis_integral(_top(w), dom, q, constants, fibers, metric)


def pullback_form(w: AFormField, G: Sequence[Expr]) -> AFormField:
    """G*w for a map G given by n component expressions in the source chart."""
    n = w.dim
    if len(G) != n:
        raise DimMismatch("map must have one component per target coordinate")
    repl = dict(enumerate(G))
    jac = [[ex.diff(G[a], j) for j in range(n)] for a in range(n)]
    out = {}
    for J in basis(n, w.degree):
        terms = []
        for I, coeff in w.components.items():
            if ex._is(coeff, 0.0):
                continue
            minor = expr_det([[jac[a][j] for j in J] for a in I])
            if ex._is(minor, 0.0):
                continue
            terms.append(ex.mul(ex.substitute(coeff, repl), minor))
        out[J] = ex.sum_exprs(terms)
    return AFormField(n, w.degree, out)


@dataclass(frozen=True)
class CoVResult:
    value: AElem
    reference: AElem
    residual: AElem


def change_of_variables_check(f: Expr, G: Sequence[Expr], D: BoxDomain, q: Quadrature = Quadrature(),
                              constants: Mapping[str, AElem] | None = None, fibers: int | None = None,
                              image: BoxDomain | None = None) -> CoVResult:
    """Integral of (f o G)|det DG| over D against f over G(D).

    With ``image`` given (G(D) is a box) the reference integrates f there;
    otherwise it is the same pulled-back integrand at a finer rule.
    """
    n = D.dim
    if len(G) != n:
        raise DimMismatch("map must have one component per coordinate")
    N = _infer_fibers(constants, fibers)
    jac_det = expr_det([[ex.diff(G[a], j) for j in range(n)] for a in range(n)])
    pulled = ex.substitute(f, dict(enumerate(G)))

    def lhs(rule: Quadrature) -> np.ndarray:
        pts, w = rule.rule(D.intervals)
        ctx = _context(pts, constants or {}, N, None)
        J = np.abs(ex.eval_array(jac_det, ctx).real)
        return _quad_values(ex.eval_array(pulled, ctx) * J, w)

    value = lhs(q)
    if image is not None:
        ref = pettis_integral(f, image, Quadrature(q.m + 4, 2 * q.s), constants, N).values
    else:
        ref = lhs(Quadrature(q.m + 4, 2 * q.s))
    return CoVResult(AElem(value), AElem(ref), AElem(np.abs(value - ref)))


@dataclass(frozen=True)
class StokesResult:
    interior: AElem
    boundary: AElem
    residual: AElem


def _face_integral(coeff: Expr, dom: BoxDomain, axis: int, at: float, q: Quadrature,
                   constants, N: int) -> np.ndarray:
    rest = [iv for i, iv in enumerate(dom.intervals) if i != axis]
    pts, w = q.rule(rest)
    full = np.insert(pts, axis, at, axis=1)
    return _quad_values(ex.eval_array(coeff, _context(full, constants, N, None)), w)


def stokes_residual(w: AFormField, dom: BoxDomain, q: Quadrature = Quadrature(),
                    constants: Mapping[str, AElem] | None = None, fibers: int | None = None) -> StokesResult:
    """Compare the integral of dw with the boundary integral of w.

    Faces carry the induced orientation (outward normal first), so the
    face x_i = b_i counts with sign (-1)^i and x_i = a_i with the opposite.
    """
    n = w.dim
    if w.degree != n - 1:
        raise WrongDegree(f"expected an {n - 1}-form, got degree {w.degree}")
    if dom.dim != n:
        raise DimMismatch("form and domain dimensions differ")
    N = _infer_fibers(constants, fibers)
    consts = constants or {}
    inner_ = integrate_form(d(w), dom, q, consts, N).values
    bdry = np.zeros(N, dtype=complex)
    for i in range(n):
        coeff = w.components[tuple(j for j in range(n) if j != i)]
        a, b = dom.intervals[i]
        diff = (_face_integral(coeff, dom, i, b, q, consts, N)
                - _face_integral(coeff, dom, i, a, q, consts, N))
        bdry += (-1) ** i * diff
    return StokesResult(AElem(inner_), AElem(bdry), AElem(np.abs(inner_ - bdry)))


def form_pairing(g: MetricField, a: AFormField, b: AFormField, dom: BoxDomain,
                 q: Quadrature = Quadrature()) -> AElem:
    """(a, b) = integral of a ^ *b."""
    if a.degree != b.degree:
        raise WrongDegree("pairing needs forms of equal degree")
    return integrate_form(wedge(a, hodge_form(g, b)), dom, q, metric=g)


def form_pairing_inner(g: MetricField, a: AFormField, b: AFormField, dom: BoxDomain,
                       q: Quadrature = Quadrature()) -> AElem:
    """(a, b) = integral of nu <a, b> sqrt|g|, with <,> induced by g^{-1}."""
    from .amodule import det_array, inverse_array
    from .exterior import gram_k_array

    if a.degree != b.degree:
        raise WrongDegree("pairing needs forms of equal degree")
    pts, w = q.rule(dom.intervals)
    ctx = g.context(pts)
    gv = g.values(pts)
    G = gram_k_array(inverse_array(gv), a.degree)
    av, bv = a.evaluate(ctx), b.evaluate(ctx)
    ip = np.einsum("i...,j...,ij...->...", av, np.conj(bv), G)
    root = np.sqrt((g.nu.values * det_array(gv)).real)
    return AElem(_quad_values(g.nu.values * ip * root, w))


def _boundary_max(forms: Sequence[AFormField], g: MetricField, dom: BoxDomain, q: Quadrature) -> float:
    worst = 0.0
    for i in range(dom.dim):
        rest = [iv for j, iv in enumerate(dom.intervals) if j != i]
        pts, _ = q.rule(rest)
        for at in dom.intervals[i]:
            full = np.insert(pts, i, at, axis=1)
            ctx = g.context(full)
            for f in forms:
                worst = max(worst, float(np.max(np.abs(f.evaluate(ctx)), initial=0.0)))
    return worst


@dataclass(frozen=True)
class AdjointnessResult:
    d_side: AElem
    delta_side: AElem
    residual: AElem


def adjointness_residual(g: MetricField, b: AFormField, a: AFormField, dom: BoxDomain,
                         q: Quadrature = Quadrature(10, 4)) -> AdjointnessResult:
    """|(d b, a) - (b, delta a)| for b of degree k-1 and a of degree k."""
    if a.degree != b.degree + 1:
        raise WrongDegree(f"need deg a = deg b + 1, got {a.degree} and {b.degree}")
    worst = _boundary_max([a, b], g, dom, q)
    if worst > SUPPORT_TOL:
        raise SupportViolation(f"form coefficients reach {worst:.3e} on the boundary")
    lhs = form_pairing(g, d(b), a, dom, q).values
    rhs = form_pairing(g, b, codifferential(g, a), dom, q).values
    return AdjointnessResult(AElem(lhs), AElem(rhs), AElem(np.abs(lhs - rhs)))
