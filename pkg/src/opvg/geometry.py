"""Metric geometry on a single chart with C(X)-valued metric coefficients.

Metric entries are expressions; their partial derivatives are taken
symbolically (up to third order, lazily) and everything else is computed
numerically at evaluation points.  All pointwise routines are batched:
``points`` has shape (P, n), and arrays carry a trailing ``(P, N)`` pair
of axes (points, fibers).  Index conventions:

* ``gamma[k, i, j]`` is the coefficient of d_k in nabla_{d_i} d_j;
* ``R[m, i, j, k]`` is the d_m component of R(d_i, d_j) d_k, with
  R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y];
* ``R_low[i, j, k, l] = <R(d_i, d_j) d_k, d_l>``.

The signature nu is constant on a connected chart, so it is computed once
on a sample grid and exposed to expressions as the reserved constant
``__nu``; sqrt|g| is then written sqrt(__nu * det g).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import exprdsl as ex
from .algebra import EPS_FC, EPS_INV, EPS_SA, AElem
from .amodule import det_array, inverse_array
from .domain import BoxDomain
from .errors import (
    DegeneratePlane,
    DimMismatch,
    MetricInvalid,
    OutOfDomain,
    PointDegenerate,
    SignatureInconsistent,
)
from .exprdsl import Expr
from .exterior import basis, sort_sign
from .fields import (
    AFormField,
    ATensorField,
    AVectorField,
    apply_vf,
    conj_expr,
    d,
    lie_bracket,
    lie_derivative,
)

NU = "__nu"


def _as_points(p, n: int) -> np.ndarray:
    pts = np.asarray(p, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != n:
        raise DimMismatch(f"points must have {n} coordinates")
    return pts


def expr_det(m: Sequence[Sequence[Expr]]) -> Expr:
    """Symbolic determinant by cofactor expansion along the first row."""
    n = len(m)
    if n == 0:
        return ex.ONE
    if n == 1:
        return m[0][0]
    terms = []
    for j in range(n):
        if ex._is(m[0][j], 0.0):
            continue
        minor = [[m[r][c] for c in range(n) if c != j] for r in range(1, n)]
        t = ex.mul(m[0][j], expr_det(minor))
        terms.append(t if j % 2 == 0 else ex.neg(t))
    return ex.sum_exprs(terms)


class MetricField:
    """A symmetric n x n matrix of expressions, nondegenerate on its domain."""

    def __init__(
        self,
        entries: Sequence[Sequence[Expr]],
        coords: Sequence[str],
        constants: Mapping[str, AElem],
        fibers: int,
        domain: BoxDomain | None = None,
        nu: AElem | None = None,
        validate: bool = True,
    ):
        n = len(entries)
        if any(len(row) != n for row in entries):
            raise DimMismatch("metric must be square")
        if len(coords) != n:
            raise DimMismatch(f"{len(coords)} coordinates for a {n}x{n} metric")
        if domain is not None and domain.dim != n:
            raise DimMismatch("domain dimension does not match the metric")
        self.n = n
        self.entries = tuple(tuple(ex._lift(e) for e in row) for row in entries)
        self.coords = tuple(coords)
        self.constants = dict(constants)
        self.fibers = fibers
        self.domain = domain
        if nu is None:
            pts = domain.grid(3) if domain is not None else np.zeros((1, n))
            if validate:
                self.validate(pts)
            nu = signature_field(self, pts, _raw=True)
        self.nu = nu

    @classmethod
    def from_strings(cls, rows, coords, constants, fibers, domain=None, **kw) -> "MetricField":
        entries = [[ex.parse(s, coords, constants) for s in row] for row in rows]
        return cls(entries, coords, constants, fibers, domain, **kw)

    # -- symbolic caches -------------------------------------------------

    @cached_property
    def dg(self):
        return [[[ex.diff(self.entries[i][j], k) if i <= j else None for j in range(self.n)]
                 for i in range(self.n)] for k in range(self.n)]

    @cached_property
    def ddg(self):
        n = self.n
        return [[[[ex.diff(self.dg[k][i][j], l) if (k <= l and i <= j) else None for j in range(n)]
                  for i in range(n)] for l in range(n)] for k in range(n)]

    @cached_property
    def dddg(self):
        n = self.n
        out = {}
        for a in range(n):
            for k in range(a, n):
                for l in range(k, n):
                    for i in range(n):
                        for j in range(i, n):
                            out[a, k, l, i, j] = ex.diff(self.ddg[k][l][i][j], a)
        return out

    @cached_property
    def det_expr(self) -> Expr:
        return expr_det(self.entries)

    @cached_property
    def sqrt_abs_det_expr(self) -> Expr:
        return ex.call("sqrt", ex.mul(ex.AConst(NU), self.det_expr))

    def minor_expr(self, rows: tuple[int, ...], cols: tuple[int, ...]) -> Expr:
        key = (rows, cols)
        cache = self.__dict__.setdefault("_minors", {})
        if key not in cache:
            cache[key] = expr_det([[self.entries[r][c] for c in cols] for r in rows])
        return cache[key]

    # -- evaluation ------------------------------------------------------

    def context(self, points: np.ndarray) -> ex.EvalContext:
        consts = dict(self.constants)
        if getattr(self, "nu", None) is not None:
            consts[NU] = self.nu
        return ex.EvalContext(tuple(points[:, i] for i in range(self.n)), consts, self.fibers)

    def check_points(self, points: np.ndarray) -> None:
        if self.domain is None:
            return
        for p in points:
            if not self.domain.contains(p):
                raise OutOfDomain(f"point {tuple(p)} outside domain {self.domain.intervals}")

    def _sym(self, table_get, lead: tuple[int, ...], ctx, shape) -> np.ndarray:
        n = self.n
        out = np.empty(lead + (n, n) + shape, dtype=complex)
        for idx in np.ndindex(*lead):
            for i in range(n):
                for j in range(i, n):
                    v = ex.eval_array(table_get(idx, i, j), ctx)
                    out[idx + (i, j)] = v
                    out[idx + (j, i)] = v
        return out

    def values(self, points: np.ndarray) -> np.ndarray:
        ctx = self.context(points)
        shape = (points.shape[0], self.fibers)
        return self._sym(lambda idx, i, j: self.entries[i][j], (), ctx, shape)

    def jet(self, points: np.ndarray, order: int) -> list[np.ndarray]:
        """[g, dg, ddg, dddg][:order+1]; dg[k, i, j] = d_k g_ij, and so on."""
        n = self.n
        ctx = self.context(points)
        shape = (points.shape[0], self.fibers)
        out = [self._sym(lambda idx, i, j: self.entries[i][j], (), ctx, shape)]
        if order >= 1:
            out.append(self._sym(lambda idx, i, j: self.dg[idx[0]][i][j], (n,), ctx, shape))
        if order >= 2:
            dd = self._sym(lambda idx, i, j: self.ddg[min(idx)][max(idx)][i][j], (n, n), ctx, shape)
            out.append(dd)
        if order >= 3:
            ddd = self._sym(lambda idx, i, j: self.dddg[tuple(sorted(idx)) + (i, j)], (n, n, n), ctx, shape)
            out.append(ddd)
        return out

    def inverse(self, g: np.ndarray, points: np.ndarray) -> np.ndarray:
        dets = det_array(g)
        mag = np.abs(dets)
        bad = mag <= EPS_INV * np.maximum(1.0, mag.max(axis=-1, keepdims=True))
        if bad.any():
            p_idx, fiber = np.argwhere(bad)[0]
            raise PointDegenerate(tuple(points[p_idx]), int(fiber))
        return inverse_array(g)

    def validate(self, points: np.ndarray) -> None:
        g = self.values(points)
        for i in range(self.n):
            for j in range(i + 1, self.n):
                a = ex.eval_array(self.entries[i][j], self.context(points))
                b = ex.eval_array(self.entries[j][i], self.context(points))
                diff = np.abs(a - b)
                if np.any(diff > EPS_SA * np.maximum(1.0, np.abs(a))):
                    p_idx, fiber = np.argwhere(diff > EPS_SA * np.maximum(1.0, np.abs(a)))[0]
                    raise MetricInvalid(tuple(points[p_idx]), int(fiber), f"g[{i}][{j}] != g[{j}][{i}]")
        imag = np.abs(g.imag)
        if np.any(imag > EPS_SA * np.maximum(1.0, np.abs(g))):
            _, _, p_idx, fiber = np.argwhere(imag > EPS_SA * np.maximum(1.0, np.abs(g)))[0]
            raise MetricInvalid(tuple(points[p_idx]), int(fiber), "entry not self-adjoint (not real)")
        dets = det_array(g)
        mag = np.abs(dets)
        bad = mag <= EPS_INV * np.maximum(1.0, mag.max(axis=-1, keepdims=True))
        if bad.any():
            p_idx, fiber = np.argwhere(bad)[0]
            raise MetricInvalid(tuple(points[p_idx]), int(fiber), "determinant not invertible")


# ---------------------------------------------------------------------------
# connections


class Connection:
    """Coefficient-based connection; subclasses provide gamma_jet."""

    n: int
    fibers: int

    def gamma_jet(self, points: np.ndarray, order: int) -> list[np.ndarray]:
        raise NotImplementedError

    def context(self, points: np.ndarray) -> ex.EvalContext:
        raise NotImplementedError

    def covariant_derivative(self, X: AVectorField, Y: AVectorField, points) -> np.ndarray:
        """(nabla_X Y)^k = X^i d_i Y^k + X^i Y^j Gamma^k_ij, shape (n, P, N)."""
        pts = _as_points(points, self.n)
        if X.dim != self.n or Y.dim != self.n:
            raise DimMismatch("field dimension does not match the chart")
        ctx = self.context(pts)
        (gam,) = self.gamma_jet(pts, 0)
        Xv = X.evaluate(ctx)
        Yv = Y.evaluate(ctx)
        dY = np.stack([ex.eval_array(apply_vf(X, Y[k]), ctx) for k in range(self.n)])
        return dY + np.einsum("i...,j...,kij...->k...", Xv, Yv, gam)


class LeviCivita(Connection):
    def __init__(self, metric: MetricField):
        self.metric = metric
        self.n = metric.n
        self.fibers = metric.fibers

    def context(self, points):
        return self.metric.context(points)

    def gamma_jet(self, points: np.ndarray, order: int) -> list[np.ndarray]:
        g = self.metric
        jet = g.jet(points, order + 1)
        ginv = g.inverse(jet[0], points)
        dg = jet[1]
        c = 0.5 * (np.einsum("ijl...->lij...", dg) + np.einsum("jil...->lij...", dg) - dg)
        out = [np.einsum("kl...,lij...->kij...", ginv, c)]
        if order >= 1:
            ddg = jet[2]
            dc = 0.5 * (np.einsum("mijl...->mlij...", ddg) + np.einsum("mjil...->mlij...", ddg) - ddg)
            dginv = -np.einsum("kp...,mpq...,ql...->mkl...", ginv, dg, ginv)
            out.append(np.einsum("mkl...,lij...->mkij...", dginv, c)
                       + np.einsum("kl...,mlij...->mkij...", ginv, dc))
        if order >= 2:
            dddg = jet[3]
            ddc = 0.5 * (np.einsum("amijl...->amlij...", dddg) + np.einsum("amjil...->amlij...", dddg) - dddg)
            ddginv = -(np.einsum("akp...,mpq...,ql...->amkl...", dginv, dg, ginv)
                       + np.einsum("kp...,ampq...,ql...->amkl...", ginv, ddg, ginv)
                       + np.einsum("kp...,mpq...,aql...->amkl...", ginv, dg, dginv))
            out.append(np.einsum("amkl...,lij...->amkij...", ddginv, c)
                       + np.einsum("mkl...,alij...->amkij...", dginv, dc)
                       + np.einsum("akl...,mlij...->amkij...", dginv, dc)
                       + np.einsum("kl...,amlij...->amkij...", ginv, ddc))
        return out


class CoefficientConnection(Connection):
    """A connection given by explicit coefficient expressions gamma[k][i][j]."""

    def __init__(self, gamma: Sequence[Sequence[Sequence[Expr]]], coords: Sequence[str],
                 constants: Mapping[str, AElem], fibers: int):
        self.n = len(coords)
        self.gamma = [[[ex._lift(gamma[k][i][j]) for j in range(self.n)] for i in range(self.n)]
                      for k in range(self.n)]
        self.coords = tuple(coords)
        self.constants = dict(constants)
        self.fibers = fibers

    @classmethod
    def from_strings(cls, rows, coords, constants, fibers):
        gam = [[[ex.parse(s, coords, constants) for s in r] for r in plane] for plane in rows]
        return cls(gam, coords, constants, fibers)

    def context(self, points):
        return ex.EvalContext(tuple(points[:, i] for i in range(self.n)), self.constants, self.fibers)

    def gamma_jet(self, points: np.ndarray, order: int) -> list[np.ndarray]:
        n = self.n
        ctx = self.context(points)
        exprs = np.empty((n, n, n), dtype=object)
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    exprs[k, i, j] = self.gamma[k][i][j]
        out = []
        for level in range(order + 1):
            arr = np.empty(exprs.shape + (points.shape[0], self.fibers), dtype=complex)
            for idx in np.ndindex(*exprs.shape):
                arr[idx] = ex.eval_array(exprs[idx], ctx)
            out.append(arr)
            if level < order:
                nxt = np.empty((n,) + exprs.shape, dtype=object)
                for a in range(n):
                    for idx in np.ndindex(*exprs.shape):
                        nxt[(a,) + idx] = ex.diff(exprs[idx], a)
                exprs = nxt
        return out


def connection_of(obj) -> Connection:
    if isinstance(obj, Connection):
        return obj
    if isinstance(obj, MetricField):
        return LeviCivita(obj)
    raise TypeError(f"expected a MetricField or Connection, got {type(obj).__name__}")


# ---------------------------------------------------------------------------
# pointwise results


@dataclass(frozen=True)
class ConnectionCoeffs:
    gamma: np.ndarray  # (n, n, n, N)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def component(self, k: int, i: int, j: int) -> AElem:
        return AElem(self.gamma[k, i, j])

    def max_asymmetry(self) -> float:
        return float(np.max(np.abs(self.gamma - self.gamma.transpose(0, 2, 1, 3)), initial=0.0))


@dataclass(frozen=True)
class CurvatureAtPoint:
    R: np.ndarray      # (n, n, n, n, N): R[m, i, j, k]
    R_low: np.ndarray  # (n, n, n, n, N): <R(d_i, d_j) d_k, d_l>
    Ric: np.ndarray    # (n, n, N)
    S: np.ndarray      # (N,)
    nu: np.ndarray     # (N,)

    @property
    def scalar(self) -> AElem:
        return AElem(self.S)

    def ricci(self, i: int, j: int) -> AElem:
        return AElem(self.Ric[i, j])


def christoffel_batch(conn, points) -> np.ndarray:
    conn = connection_of(conn)
    pts = _as_points(points, conn.n)
    if isinstance(conn, LeviCivita):
        conn.metric.check_points(pts)
    return conn.gamma_jet(pts, 0)[0]


def christoffel_at(g, p) -> ConnectionCoeffs:
    return ConnectionCoeffs(christoffel_batch(g, p)[..., 0, :])


def riemann_from_gamma(gam: np.ndarray, dgam: np.ndarray) -> np.ndarray:
    """R[m,i,j,k] = d_i G^m_jk - d_j G^m_ik + G^l_jk G^m_il - G^l_ik G^m_jl."""
    return (np.einsum("imjk...->mijk...", dgam) - np.einsum("jmik...->mijk...", dgam)
            + np.einsum("ljk...,mil...->mijk...", gam, gam)
            - np.einsum("lik...,mjl...->mijk...", gam, gam))


def curvature_batch(conn, points, metric: MetricField | None = None):
    """Return (R, R_low, Ric, S) arrays with trailing (P, N) axes."""
    conn = connection_of(conn)
    if metric is None:
        metric = conn.metric if isinstance(conn, LeviCivita) else None
    pts = _as_points(points, conn.n)
    gam, dgam = conn.gamma_jet(pts, 1)
    R = riemann_from_gamma(gam, dgam)
    if metric is None:
        return R, None, np.einsum("iijk...->jk...", R), None
    metric.check_points(pts)
    g = metric.values(pts)
    ginv = metric.inverse(g, pts)
    R_low = np.einsum("mijk...,ml...->ijkl...", R, g)
    Ric = np.einsum("iijk...->jk...", R)
    S = np.einsum("ij...,ij...->...", ginv, Ric)
    return R, R_low, Ric, S


def curvature_at(g: MetricField, p) -> CurvatureAtPoint:
    R, R_low, Ric, S = curvature_batch(g, p)
    nu = g.nu.values
    return CurvatureAtPoint(R[..., 0, :], R_low[..., 0, :], Ric[..., 0, :], S[..., 0, :], nu)


def nabla_riemann_batch(conn, points) -> np.ndarray:
    """(nabla_a R)[a, m, i, j, k] from the second jet of the connection."""
    conn = connection_of(conn)
    pts = _as_points(points, conn.n)
    gam, dgam, ddgam = conn.gamma_jet(pts, 2)
    R = riemann_from_gamma(gam, dgam)
    dR = (np.einsum("aimjk...->amijk...", ddgam) - np.einsum("ajmik...->amijk...", ddgam)
          + np.einsum("aljk...,mil...->amijk...", dgam, gam)
          + np.einsum("ljk...,amil...->amijk...", gam, dgam)
          - np.einsum("alik...,mjl...->amijk...", dgam, gam)
          - np.einsum("lik...,amjl...->amijk...", gam, dgam))
    return (dR
            + np.einsum("mal...,lijk...->amijk...", gam, R)
            - np.einsum("lai...,mljk...->amijk...", gam, R)
            - np.einsum("laj...,milk...->amijk...", gam, R)
            - np.einsum("lak...,mijl...->amijk...", gam, R))


def first_bianchi_residual(conn, points) -> float:
    R = curvature_batch(conn, points)[0]
    cyc = R + np.einsum("mjki...->mijk...", R) + np.einsum("mkij...->mijk...", R)
    return float(np.max(np.abs(cyc)))


def second_bianchi_residual(conn, points) -> float:
    D = nabla_riemann_batch(conn, points)
    # (nabla_a R)(b, c) + (nabla_b R)(c, a) + (nabla_c R)(a, b)
    cyc = D + np.einsum("bmcak...->ambck...", D) + np.einsum("cmabk...->ambck...", D)
    return float(np.max(np.abs(cyc)))


def curvature_symmetry_residuals(g: MetricField, points) -> tuple[float, float]:
    """Antisymmetry in the last pair and pair exchange of R_low."""
    R_low = curvature_batch(g, points)[1]
    anti = R_low + np.einsum("ijlk...->ijkl...", R_low)
    pair = R_low - np.einsum("klij...->ijkl...", R_low)
    return float(np.max(np.abs(anti))), float(np.max(np.abs(pair)))


def ricci_asymmetry(g: MetricField, points) -> float:
    Ric = curvature_batch(g, points)[2]
    return float(np.max(np.abs(Ric - np.einsum("ij...->ji...", Ric))))


def apply_curvature(R: np.ndarray, u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """R(u, v) w for coefficient arrays u, v, w of shape (n, ...)."""
    return np.einsum("mijk...,i...,j...,k...->m...", R, u, v, w)


def bilinear(g: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """<u, v> = u^i v^j* g_ij."""
    return np.einsum("i...,j...,ij...->...", u, np.conj(v), g)


def constant_curvature_residual(g: MetricField, points, C: np.ndarray, vectors=None, rng=None) -> float:
    """max |R(u,v)w - C(<v,w*>u - <u,w*>v)| over coordinate (and optional random) triples."""
    pts = _as_points(points, g.n)
    R = curvature_batch(g, pts)[0]
    gv = g.values(pts)
    n = g.n
    eye = np.eye(n)
    triples = [(eye[i], eye[j], eye[k]) for i in range(n) for j in range(n) for k in range(n)]
    if rng is not None:
        for _ in range(vectors or 4):
            triples.append(tuple(rng.normal(size=(n, g.fibers)) + 1j * rng.normal(size=(n, g.fibers))
                                 for _ in range(3)))
    shape = (n,) + gv.shape[2:]

    def lift(x):
        x = np.asarray(x, dtype=complex)
        return np.broadcast_to(x.reshape(n, 1, 1) if x.ndim == 1 else x[:, None, :], shape)

    worst = 0.0
    for u, v, w in triples:
        u, v, w = lift(u), lift(v), lift(w)
        lhs = apply_curvature(R, u, v, w)
        ws = np.conj(w)
        rhs = C * (bilinear(gv, v, ws) * u - bilinear(gv, u, ws) * v)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def sectional(g: MetricField, p, u, v) -> AElem:
    """K(u, v) = <R(u, v) v*, u> / Q(u, v) at a single point."""
    pts = _as_points(p, g.n)
    u = _coeff_array(u, g)
    v = _coeff_array(v, g)
    R_low = curvature_batch(g, pts)[1][..., 0, :]
    gv = g.values(pts)[..., 0, :]
    num = np.einsum("i...,j...,k...,l...,ijkl...->...", u, v, np.conj(v), np.conj(u), R_low)
    uu, vv, uv = bilinear(gv, u, u), bilinear(gv, v, v), bilinear(gv, u, v)
    Q = uu * vv - uv * np.conj(uv)
    mag = np.abs(Q)
    scale = max(1.0, float(np.max(np.abs(uu * vv))))
    bad = mag <= EPS_INV * scale
    if bad.any():
        raise DegeneratePlane(int(np.flatnonzero(bad)[0]))
    return AElem(num / Q)


def _coeff_array(u, g: MetricField) -> np.ndarray:
    """Coerce a coefficient vector (AElems, scalars, or an array) to shape (n, N)."""
    if isinstance(u, np.ndarray) and u.ndim == 2:
        return u.astype(complex)
    rows = []
    for c in u:
        rows.append(c.values if isinstance(c, AElem) else np.full(g.fibers, c, dtype=complex))
    arr = np.array(rows, dtype=complex)
    if arr.shape != (g.n, g.fibers):
        raise DimMismatch(f"coefficient vector must have {g.n} entries")
    return arr


def covariant_derivative(conn, X: AVectorField, Y: AVectorField, p) -> list[AElem]:
    conn = connection_of(conn)
    if isinstance(conn, LeviCivita):
        conn.metric.check_points(_as_points(p, conn.n))
    v = conn.covariant_derivative(X, Y, p)
    return [AElem(v[k, 0]) for k in range(conn.n)]


def torsion_batch(conn, X: AVectorField, Y: AVectorField, points) -> np.ndarray:
    conn = connection_of(conn)
    pts = _as_points(points, conn.n)
    br = lie_bracket(X, Y).evaluate(conn.context(pts))
    return conn.covariant_derivative(X, Y, pts) - conn.covariant_derivative(Y, X, pts) - br


def torsion_at(conn, X: AVectorField, Y: AVectorField, p) -> list[AElem]:
    t = torsion_batch(conn, X, Y, p)
    return [AElem(t[k, 0]) for k in range(t.shape[0])]


def metric_compatibility_residual(g: MetricField, points, conn=None) -> float:
    """max |d_k g_ij - G^l_ki g_lj - G^l_kj g_il| over indices and points."""
    pts = _as_points(points, g.n)
    conn = LeviCivita(g) if conn is None else connection_of(conn)
    gv, dg = g.jet(pts, 1)
    gam = conn.gamma_jet(pts, 0)[0]
    res = dg - np.einsum("lki...,lj...->kij...", gam, gv) - np.einsum("lkj...,il...->kij...", gam, gv)
    return float(np.max(np.abs(res)))


def inner_expr(g: MetricField, Y: AVectorField, Z: AVectorField) -> Expr:
    """<Y, Z> as an expression: sum_ij Y^i conj(Z^j) g_ij."""
    n = g.n
    return ex.sum_exprs(ex.mul(ex.mul(Y[i], conj_expr(Z[j])), g.entries[i][j])
                        for i in range(n) for j in range(n)
                        if not ex._is(g.entries[i][j], 0.0))


def compatibility_fields_residual(g: MetricField, X, Y, Z, points, conn=None) -> float:
    """X<Y,Z> - <nabla_X Y, Z> - <Y, nabla_{X*} Z> for algebra-valued fields."""
    from .fields import involution_field

    pts = _as_points(points, g.n)
    conn = LeviCivita(g) if conn is None else connection_of(conn)
    ctx = g.context(pts)
    lhs = ex.eval_array(apply_vf(X, inner_expr(g, Y, Z)), ctx)
    gv = g.values(pts)
    nXY = conn.covariant_derivative(X, Y, pts)
    nXsZ = conn.covariant_derivative(involution_field(X), Z, pts)
    rhs = bilinear(gv, nXY, Z.evaluate(ctx)) + bilinear(gv, Y.evaluate(ctx), nXsZ)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# gradient, Hessian, divergence


def _f_jet(g: MetricField, f: Expr, pts: np.ndarray, order: int):
    ctx = g.context(pts)
    n = g.n
    df_e = [ex.diff(f, i) for i in range(n)]
    out = [ex.eval_array(f, ctx), np.stack([ex.eval_array(e, ctx) for e in df_e])]
    if order >= 2:
        dd = np.empty((n, n) + out[0].shape, dtype=complex)
        for i in range(n):
            for j in range(i, n):
                dd[i, j] = dd[j, i] = ex.eval_array(ex.diff(df_e[j], i), ctx)
        out.append(dd)
    return out


def gradient_batch(g: MetricField, f: Expr, points) -> np.ndarray:
    pts = _as_points(points, g.n)
    g.check_points(pts)
    _, df = _f_jet(g, f, pts, 1)
    ginv = g.inverse(g.values(pts), pts)
    return np.einsum("i...,ij...->j...", df, ginv)


def gradient(g: MetricField, f: Expr, p) -> list[AElem]:
    v = gradient_batch(g, f, p)
    return [AElem(v[i, 0]) for i in range(g.n)]


def hessian_batch(g: MetricField, f: Expr, points) -> np.ndarray:
    """Hess(f)(d_i, d_j) = d_i d_j f - <grad f, nabla_{d_i} d_j>."""
    pts = _as_points(points, g.n)
    g.check_points(pts)
    _, df, ddf = _f_jet(g, f, pts, 2)
    gam = LeviCivita(g).gamma_jet(pts, 0)[0]
    return ddf - np.einsum("kij...,k...->ij...", np.conj(gam), df)


def hessian_via_gradient_batch(g: MetricField, f: Expr, points) -> np.ndarray:
    """Hess(f)(d_i, d_j) = <nabla_{d_i} grad f, d_j>."""
    pts = _as_points(points, g.n)
    _, df, ddf = _f_jet(g, f, pts, 2)
    gv, dg = g.jet(pts, 1)
    ginv = g.inverse(gv, pts)
    dginv = -np.einsum("kp...,mpq...,ql...->mkl...", ginv, dg, ginv)
    grad = np.einsum("j...,jk...->k...", df, ginv)
    dgrad = np.einsum("ij...,jk...->ik...", ddf, ginv) + np.einsum("j...,ijk...->ik...", df, dginv)
    gam = LeviCivita(g).gamma_jet(pts, 0)[0]
    cov = dgrad + np.einsum("kil...,l...->ik...", gam, grad)
    return np.einsum("ik...,kj...->ij...", cov, gv)


def hessian(g: MetricField, f: Expr, p) -> np.ndarray:
    return hessian_batch(g, f, p)[..., 0, :]


def divergence_batch(g: MetricField, X: AVectorField, points) -> np.ndarray:
    """g^{ij} <nabla_{d_i} X, d_j> = d_i X^i + G^i_ij X^j."""
    pts = _as_points(points, g.n)
    g.check_points(pts)
    n = g.n
    ctx = g.context(pts)
    gv = g.values(pts)
    ginv = g.inverse(gv, pts)
    gam = LeviCivita(g).gamma_jet(pts, 0)[0]
    Xv = X.evaluate(ctx)
    dX = np.stack([np.stack([ex.eval_array(ex.diff(X[k], i), ctx) for k in range(n)]) for i in range(n)])
    cov = dX + np.einsum("kij...,j...->ik...", gam, Xv)  # cov[i, k] = (nabla_i X)^k
    return np.einsum("ij...,ik...,kj...->...", ginv, cov, gv)


def divergence(g: MetricField, X: AVectorField, p) -> AElem:
    return AElem(divergence_batch(g, X, p)[0])


# ---------------------------------------------------------------------------
# Hodge star on forms, codifferential, Laplacian


def hodge_form(g: MetricField, a: AFormField) -> AFormField:
    """Forms-level Hodge star, characterized by a ^ b = <b, *a> Omega for all b.

    Here Omega = sqrt|g| dx^1 ^ ... ^ dx^n and <.,.> is induced by g^{-1} on
    covectors.  In components:
    (*a)_{J'} = (1/sqrt|g|) sum_J det(g[J', J]) eps(J^c, J) conj(a_{J^c}).
    """
    n, k = a.dim, a.degree
    if n != g.n:
        raise DimMismatch("form dimension does not match the metric")
    inv_root = ex.ipow(g.sqrt_abs_det_expr, -1)
    out = {}
    for Jp in basis(n, n - k):
        terms = []
        for J in basis(n, n - k):
            Jc = tuple(i for i in range(n) if i not in J)
            coeff = a.components[Jc]
            if ex._is(coeff, 0.0):
                continue
            s, _ = sort_sign(Jc + J)
            m = g.minor_expr(Jp, J)
            if ex._is(m, 0.0):
                continue
            t = ex.mul(m, conj_expr(coeff))
            terms.append(t if s > 0 else ex.neg(t))
        out[Jp] = ex.mul(ex.sum_exprs(terms), inv_root)
    return AFormField(n, n - k, out)


def hodge_form_pointwise(g: MetricField, a: AFormField, p) -> "MultiVector":
    """The same star computed by a linear solve on the covector space at one point."""
    from .amodule import AMatrix, InnerProductSpace
    from .exterior import MultiVector, OrientedSpace, hodge

    pts = _as_points(p, g.n)
    gv = g.values(pts)[..., 0, :]
    ginv = inverse_array(gv)
    root = np.sqrt(np.abs(det_array(gv).real))
    n = g.n
    vol = MultiVector.from_array(n, n, root[None, :])
    space = OrientedSpace(InnerProductSpace(AMatrix(ginv)), volume=vol)
    coeffs = a.evaluate(g.context(pts))[:, 0, :]
    return hodge(space, MultiVector.from_array(n, a.degree, coeffs))


def codifferential(g: MetricField, a: AFormField) -> AFormField:
    """delta a = (-1)^{n(k+1)+1} nu * d * a; zero on 0-forms."""
    n, k = a.dim, a.degree
    if k == 0:
        return AFormField(n, 0)
    inner_ = hodge_form(g, d(hodge_form(g, a)))
    sign = -1.0 if (n * (k + 1) + 1) % 2 else 1.0
    return inner_.scale(ex.mul(ex.lit(sign), ex.AConst(NU)))


def laplacian_form(g: MetricField, a: AFormField) -> AFormField:
    """(d delta + delta d) a."""
    out = codifferential(g, d(a)) if a.degree < a.dim else AFormField(a.dim, a.degree)
    if a.degree > 0:
        out = out + d(codifferential(g, a))
    return out


def laplacian_expr(g: MetricField, f: Expr) -> Expr:
    """-nu * d * d f as a single expression."""
    return codifferential(g, d(AFormField.scalar(g.n, f))).components[()]


def laplacian_fn_batch(g: MetricField, f: Expr, points) -> np.ndarray:
    pts = _as_points(points, g.n)
    g.check_points(pts)
    return ex.eval_array(laplacian_expr(g, f), g.context(pts))


def laplacian_fn(g: MetricField, f: Expr, p) -> AElem:
    return AElem(laplacian_fn_batch(g, f, p)[0])


def laplacian_coordinate_batch(g: MetricField, f: Expr, points) -> np.ndarray:
    """-(1/sqrt|g|) d_i(g^{ij} sqrt|g| d_j f), with d_i sqrt|g| = nu d_i g / (2 sqrt|g|)."""
    pts = _as_points(points, g.n)
    g.check_points(pts)
    _, df, ddf = _f_jet(g, f, pts, 2)
    gv, dg = g.jet(pts, 1)
    ginv = g.inverse(gv, pts)
    dginv = -np.einsum("kp...,mpq...,ql...->mkl...", ginv, dg, ginv)
    det = det_array(gv)
    ddet = det * np.einsum("pq...,iqp...->i...", ginv, dg)  # Jacobi's formula
    nu = g.nu.values
    root = np.sqrt((nu * det).real)
    droot = nu * ddet / (2 * root)
    total = (np.einsum("iij...,j...->...", dginv, df)
             + np.einsum("ij...,ij...->...", ginv, ddf)
             + np.einsum("ij...,i...,j...->...", ginv, droot, df) / root)
    return -total


def laplacian_coordinate(g: MetricField, f: Expr, p) -> AElem:
    return AElem(laplacian_coordinate_batch(g, f, p)[0])


# ---------------------------------------------------------------------------
# signature, volume, affine structure of connections


def signature_field(g: MetricField, sample_points, _raw: bool = False) -> AElem:
    pts = _as_points(sample_points, g.n)
    gv = g.values(pts)
    det = det_array(gv)
    mag = np.abs(det)
    if np.any(mag <= EPS_INV * np.maximum(1.0, mag.max(axis=-1, keepdims=True))):
        p_idx, fiber = np.argwhere(mag <= EPS_INV * np.maximum(1.0, mag.max(axis=-1, keepdims=True)))[0]
        raise PointDegenerate(tuple(pts[p_idx]), int(fiber))
    nu = np.abs(det) / det
    # real determinants give exactly +-1
    nu = np.where(np.abs(det.imag) <= EPS_SA * np.abs(det), np.sign(det.real), nu)
    first = nu[0]
    spread = np.abs(nu - first[None, :])
    if np.any(spread > EPS_FC):
        p_idx, fiber = np.argwhere(spread > EPS_FC)[0]
        raise SignatureInconsistent(
            f"signature changes between {tuple(pts[0])} and {tuple(pts[p_idx])} at fiber {fiber}")
    return AElem(first.real)


def volume_coefficient_batch(g: MetricField, points) -> np.ndarray:
    pts = _as_points(points, g.n)
    det = det_array(g.values(pts))
    return np.sqrt((g.nu.values * det).real).astype(complex)


def volume_form_field(g: MetricField) -> AFormField:
    n = g.n
    return AFormField(n, n, {tuple(range(n)): g.sqrt_abs_det_expr})


def lie_volume_sides(g: MetricField, X: AVectorField, points) -> tuple[np.ndarray, np.ndarray]:
    """(L_X Omega)(d_1..d_n) symbolically, and div(X) sqrt|g| numerically."""
    pts = _as_points(points, g.n)
    n = g.n
    L = lie_derivative(X, volume_form_field(g).to_tensor())
    lhs = ex.eval_array(L.components[tuple(range(n))], g.context(pts))
    rhs = divergence_batch(g, X, pts) * volume_coefficient_batch(g, pts)
    return lhs, rhs


def lie_volume_check(g: MetricField, X: AVectorField, p) -> AElem:
    lhs, rhs = lie_volume_sides(g, X, p)
    return AElem((lhs - rhs)[0])


def connection_difference_is_tensor(c1, c2, X: AVectorField, Y: AVectorField, f: Expr, points,
                                    tol: float = 1e-9) -> bool:
    """Check (nabla1 - nabla2) is function-bilinear at the given points."""
    c1, c2 = connection_of(c1), connection_of(c2)
    if c1.n != c2.n:
        raise DimMismatch("connections on charts of different dimension")
    pts = _as_points(points, c1.n)

    def D(A, B):
        return c1.covariant_derivative(A, B, pts) - c2.covariant_derivative(A, B, pts)

    fv = ex.eval_array(f, c1.context(pts))
    base = D(X, Y)
    r1 = np.max(np.abs(D(X.scale(f), Y) - fv * base))
    r2 = np.max(np.abs(D(X, Y.scale(f)) - fv * base))
    scale = max(1.0, float(np.max(np.abs(base))))
    return bool(max(r1, r2) <= tol * scale)
