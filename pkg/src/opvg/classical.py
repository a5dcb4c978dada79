"""Scalar reference geometry, one fiber at a time.

Each fiber of an algebra-valued metric is an ordinary (pseudo-)Riemannian
metric.  This module rebuilds it in sympy with the fiber's constant values
substituted and evaluates textbook formulas, so it shares no derivative or
contraction code with `geometry`.  Used as an oracle by the check suite.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import sympy as sp

from . import exprdsl as ex
from .exterior import basis
from .geometry import NU, MetricField

_SP_FN = {
    "sin": sp.sin, "cos": sp.cos, "tan": sp.tan, "exp": sp.exp, "log": sp.log,
    "sqrt": sp.sqrt, "sinh": sp.sinh, "cosh": sp.cosh, "conj": sp.conjugate,
}


def to_sympy(e: ex.Expr, xs, consts: dict) -> sp.Expr:
    memo = {}

    def go(e):
        if id(e) in memo:
            return memo[id(e)]
        if isinstance(e, ex.Coord):
            out = xs[e.index]
        elif isinstance(e, ex.RealLit):
            out = sp.Float(e.value, 17) if e.value != int(e.value) else sp.Integer(int(e.value))
        elif isinstance(e, ex.AConst):
            out = consts[e.name]
        elif isinstance(e, ex.Neg):
            out = -go(e.arg)
        elif isinstance(e, ex.Add):
            out = go(e.left) + go(e.right)
        elif isinstance(e, ex.Sub):
            out = go(e.left) - go(e.right)
        elif isinstance(e, ex.Mul):
            out = go(e.left) * go(e.right)
        elif isinstance(e, ex.Div):
            out = go(e.left) / go(e.right)
        elif isinstance(e, ex.IntPow):
            out = go(e.base) ** e.exponent
        elif isinstance(e, ex.Call):
            out = _SP_FN[e.fn](go(e.arg))
        else:
            raise TypeError(e)
        memo[id(e)] = out
        return out

    return go(e)


def _num(z: complex) -> sp.Expr:
    z = complex(z)
    if z.imag == 0:
        return sp.Float(z.real, 17)
    return sp.Float(z.real, 17) + sp.I * sp.Float(z.imag, 17)


class FiberGeometry:
    """Classical geometry of fiber ``fiber`` of an algebra-valued metric."""

    def __init__(self, metric: MetricField, fiber: int):
        self.n = metric.n
        self.fiber = fiber
        self.xs = sp.symbols(f"x0:{self.n}", real=True)
        self.consts = {k: _num(v.values[fiber]) for k, v in metric.constants.items()}
        self.consts[NU] = _num(metric.nu.values[fiber])
        g = sp.Matrix(self.n, self.n, lambda i, j: to_sympy(metric.entries[i][j], self.xs, self.consts))
        self.g = g.applyfunc(lambda e: sp.re(e) if e.has(sp.I) else e)

    def sym(self, e: ex.Expr) -> sp.Expr:
        return to_sympy(e, self.xs, self.consts)

    def _fn(self, expr):
        return sp.lambdify(self.xs, expr, "numpy")

    def _at(self, fn, p):
        return np.array(fn(*p), dtype=complex)

    @cached_property
    def _ginv_sym(self):
        return self.g.adjugate() / self.g.det()

    @cached_property
    def _gamma_sym(self):
        n, g, gi, x = self.n, self.g, self._ginv_sym, self.xs
        return [[[sum(gi[k, l] * (sp.diff(g[j, l], x[i]) + sp.diff(g[i, l], x[j]) - sp.diff(g[i, j], x[l]))
                      for l in range(n)) / 2 for j in range(n)] for i in range(n)] for k in range(n)]

    @cached_property
    def _gamma_fn(self):
        return self._fn(self._gamma_sym)

    @cached_property
    def _dgamma_fn(self):
        n, x = self.n, self.xs
        return self._fn([[[[sp.diff(self._gamma_sym[k][i][j], x[a]) for j in range(n)] for i in range(n)]
                          for k in range(n)] for a in range(n)])

    @cached_property
    def _g_fn(self):
        return self._fn(self.g.tolist())

    def metric(self, p) -> np.ndarray:
        return self._at(self._g_fn, p)

    def signature(self, p) -> float:
        return float(np.sign(np.linalg.det(self.metric(p).real)))

    def christoffel(self, p) -> np.ndarray:
        return self._at(self._gamma_fn, p)

    def riemann(self, p) -> np.ndarray:
        """R[m,i,j,k] = d_i G^m_jk - d_j G^m_ik + G^m_il G^l_jk - G^m_jl G^l_ik."""
        n = self.n
        G = self.christoffel(p)
        dG = self._at(self._dgamma_fn, p)  # dG[a, k, i, j]
        R = np.zeros((n, n, n, n), dtype=complex)
        for m in range(n):
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        val = dG[i, m, j, k] - dG[j, m, i, k]
                        for l in range(n):
                            val += G[m, i, l] * G[l, j, k] - G[m, j, l] * G[l, i, k]
                        R[m, i, j, k] = val
        return R

    def ricci(self, p) -> np.ndarray:
        R = self.riemann(p)
        n = self.n
        return np.array([[sum(R[i, i, j, k] for i in range(n)) for k in range(n)] for j in range(n)])

    def scalar(self, p) -> complex:
        ginv = np.linalg.inv(self.metric(p))
        return complex(np.sum(ginv * self.ricci(p)))

    def sectional(self, p, u, v) -> complex:
        g = self.metric(p)
        R = self.riemann(p)
        Rl = np.einsum("mijk,ml->ijkl", R, g)
        num = np.einsum("i,j,k,l,ijkl->", u, v, np.conj(v), np.conj(u), Rl)
        uu, vv, uv = u @ g @ np.conj(u), v @ g @ np.conj(v), u @ g @ np.conj(v)
        return complex(num / (uu * vv - uv * np.conj(uv)))

    def gradient(self, f: ex.Expr, p) -> np.ndarray:
        fs = self.sym(f)
        df = self._at(self._fn([sp.diff(fs, x) for x in self.xs]), p)
        return np.linalg.inv(self.metric(p)) @ df

    def hessian(self, f: ex.Expr, p) -> np.ndarray:
        fs = self.sym(f)
        x = self.xs
        ddf = self._at(self._fn([[sp.diff(fs, a, b) for b in x] for a in x]), p)
        df = self._at(self._fn([sp.diff(fs, a) for a in x]), p)
        return ddf - np.einsum("kij,k->ij", np.conj(self.christoffel(p)), df)

    def divergence(self, X, p) -> complex:
        """(1/sqrt|g|) d_i (sqrt|g| X^i)."""
        root = sp.sqrt(sp.Abs(self.g.det()))
        expr = sum(sp.diff(root * self.sym(X[i]), self.xs[i]) for i in range(self.n)) / root
        return complex(self._fn(expr)(*p))

    def laplacian(self, f: ex.Expr, p) -> complex:
        """-g^{ij}(d_i d_j f - G^k_ij d_k f)."""
        ginv = np.linalg.inv(self.metric(p))
        H = self.hessian(f, p)
        return complex(-np.sum(ginv * H))

    def hodge(self, coeffs: dict, k: int, p) -> np.ndarray:
        """nu times the classical star of conj(alpha); alpha given as {I: value} on increasing I.

        Classical: (*a)_{J'} = sqrt|g| sum_I a^I eps(I, J'), with a^I raised by
        minors of g^{-1}.
        """
        n = self.n
        g = self.metric(p).real
        ginv = np.linalg.inv(g)
        nu = np.sign(np.linalg.det(g))
        root = np.sqrt(abs(np.linalg.det(g)))
        keys = basis(n, k)
        raised = {I: sum(np.linalg.det(ginv[np.ix_(I, J)]) * np.conj(coeffs.get(J, 0.0)) for J in keys)
                  for I in keys}
        out = []
        for Jp in basis(n, n - k):
            val = 0.0
            for I in keys:
                if set(I) & set(Jp):
                    continue
                val += raised[I] * _perm_sign(I + Jp)
            out.append(nu * root * val)
        return np.array(out, dtype=complex)


def _perm_sign(seq) -> int:
    seq = list(seq)
    s = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                s = -s
    return s


def oracle_residuals(g: MetricField, points, f: ex.Expr | None = None, X=None, form=None,
                     planes=None) -> dict[str, float]:
    """Max |library - classical| per quantity over points and fibers."""
    from . import geometry as G

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    fibers = [FiberGeometry(g, x) for x in range(g.fibers)]
    out: dict[str, float] = {}

    def rec(name, diff):
        out[name] = max(out.get(name, 0.0), float(np.max(np.abs(diff), initial=0.0)))

    gam = G.christoffel_batch(g, pts)
    R, _, Ric, S = G.curvature_batch(g, pts)
    if f is not None:
        grad = G.gradient_batch(g, f, pts)
        hess = G.hessian_batch(g, f, pts)
        lap = G.laplacian_fn_batch(g, f, pts)
    if X is not None:
        div = G.divergence_batch(g, X, pts)
    n = g.n
    planes = planes if planes is not None else ([(0, 1)] if n >= 2 else [])
    for pi, p in enumerate(pts):
        for x, fg in enumerate(fibers):
            rec("nu", g.nu.values[x] - fg.signature(p))
            rec("christoffel", gam[..., pi, x] - fg.christoffel(p))
            rec("riemann", R[..., pi, x] - fg.riemann(p))
            rec("ricci", Ric[..., pi, x] - fg.ricci(p))
            rec("scalar", S[pi, x] - fg.scalar(p))
            for a, b in planes:
                e = np.eye(n)
                K = G.sectional(g, p, e[a], e[b]).values[x]
                rec("sectional", K - fg.sectional(p, e[a], e[b]))
            if f is not None:
                rec("gradient", grad[:, pi, x] - fg.gradient(f, p))
                rec("hessian", hess[..., pi, x] - fg.hessian(f, p))
                rec("laplacian", lap[pi, x] - fg.laplacian(f, p))
            if X is not None:
                rec("divergence", div[pi, x] - fg.divergence(X, p))
            if form is not None:
                ctx = g.context(p[None, :])
                coeffs = form.evaluate(ctx)[:, 0, x]
                cd = dict(zip(basis(n, form.degree), coeffs))
                lib = G.hodge_form(g, form).evaluate(ctx)[:, 0, x]
                rec("hodge", lib - fg.hodge(cd, form.degree, p))
    return out
