"""Identity suite: every checkable identity of the theory evaluated on one scene.

Each check returns a row (name, max residual, tolerance).  Random fields
are seeded polynomials whose coefficients may carry private algebra
constants, so A-linearity and the involution are genuinely exercised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprdsl as ex
from . import geometry as G
from .algebra import EPS_FC, AElem
from .amodule import AMatrix, InnerProductSpace, det_array
from .classical import oracle_residuals
from .errors import DegeneratePlane
from .exterior import MultiVector, OrientedSpace, basis, hodge, inner, volume_form, wedge
from .fields import (
    AFormField,
    AVectorField,
    apply_vf,
    cartan_rhs,
    involution_field,
    involution_function,
    lie_bracket,
    lie_derivative,
)
from .scene import Scene

TOL = {
    "signature_constancy": EPS_FC,
    "signature_square": EPS_FC,
    "christoffel_symmetry": 1e-10,
    "torsion": 1e-9,
    "metric_compatibility": 1e-9,
    "metric_compatibility_fields": 1e-9,
    "bianchi_first": 1e-8,
    "bianchi_second": 1e-6,
    "curvature_antisymmetry": 1e-8,
    "curvature_pair_symmetry": 1e-8,
    "ricci_symmetry": 1e-9,
    "sectional_plane_invariance": 1e-8,
    "hodge_double_star": 1e-9,
    "hodge_wedge_inner": 1e-9,
    "hodge_star_inner": 1e-9,
    "hodge_star_one": 1e-9,
    "hodge_star_volume": 1e-9,
    "volume_norm": 1e-9,
    "hodge_forms_vs_pointwise": 1e-9,
    "involution_derivation": 1e-8,
    "involution_bracket": 1e-8,
    "jacobi": 1e-8,
    "cartan": 1e-8,
    "lie_volume": 1e-8,
    "laplacian_dual_path": 1e-8,
    "hessian_dual_path": 1e-9,
    "oracle": 1e-10,
}


@dataclass(frozen=True)
class Row:
    name: str
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    def to_json(self) -> dict:
        return {"name": self.name, "max_residual": self.max_residual,
                "tolerance": self.tolerance, "pass": self.passed}


def _mx(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


class RandomFields:
    """Seeded random polynomial functions, vector fields and forms on a chart."""

    def __init__(self, n: int, fibers: int, rng: np.random.Generator, n_consts: int = 2):
        self.n = n
        self.rng = rng
        self.constants = {
            f"k{i}": AElem(rng.normal(size=fibers) + 1j * rng.normal(size=fibers))
            for i in range(n_consts)
        }

    def function(self, algebra: bool = True, degree: int = 2) -> ex.Expr:
        rng, n = self.rng, self.n
        terms = [ex.lit(round(rng.normal(), 3))]
        for _ in range(3):
            t = ex.lit(round(rng.normal(), 3))
            for _ in range(int(rng.integers(1, degree + 1))):
                t = ex.mul(t, ex.Coord(int(rng.integers(n))))
            terms.append(t)
        f = ex.sum_exprs(terms)
        if algebra and self.constants and rng.random() < 0.7:
            name = sorted(self.constants)[int(rng.integers(len(self.constants)))]
            f = ex.add(f, ex.mul(ex.AConst(name), ex.Coord(int(rng.integers(n)))))
        return f

    def vector_field(self, algebra: bool = True) -> AVectorField:
        return AVectorField([self.function(algebra) for _ in range(self.n)])

    def form(self, k: int, algebra: bool = True) -> AFormField:
        return AFormField(self.n, k, {I: self.function(algebra) for I in basis(self.n, k)})

    def multivector(self, k: int, fibers: int) -> MultiVector:
        size = (len(basis(self.n, k)), fibers)
        return MultiVector.from_array(self.n, k, self.rng.normal(size=size) + 1j * self.rng.normal(size=size))


def extended_metric(g: G.MetricField, extra: dict[str, AElem]) -> G.MetricField:
    consts = dict(g.constants)
    consts.update(extra)
    return G.MetricField(g.entries, g.coords, consts, g.fibers, g.domain, nu=g.nu)


def run_suite(scene: Scene, samples: int = 16, seed: int = 42, oracle_points: int = 4) -> tuple[list[Row], dict]:
    rng = np.random.default_rng(seed)
    g0 = scene.metric
    n, N = g0.n, g0.fibers
    pts = scene.domain.sample(rng, samples)
    rf = RandomFields(n, N, rng)
    g = extended_metric(g0, rf.constants)
    if scene.connection is None:
        conn = G.LeviCivita(g)
    else:
        conn = G.CoefficientConnection(scene.connection.gamma, g.coords, g.constants, N)
    ctx = g.context(pts)
    rows: list[Row] = []

    def add(name: str, residual: float):
        rows.append(Row(name, float(residual), TOL[name.split(":")[0]]))

    # signature
    check_pts = np.vstack([scene.domain.grid(3), pts])
    det = det_array(g.values(check_pts))
    nu_pts = np.sign(det.real)
    add("signature_constancy", _mx(nu_pts - g.nu.values[None, :]))
    add("signature_square", _mx(g.nu.values ** 2 - 1))

    # connection
    gam = conn.gamma_jet(pts, 0)[0]
    add("christoffel_symmetry", _mx(gam - np.swapaxes(gam, 1, 2)))
    pairs = [(rf.vector_field(), rf.vector_field()) for _ in range(3)]
    add("torsion", max(_mx(G.torsion_batch(conn, X, Y, pts)) for X, Y in pairs))
    add("metric_compatibility", G.metric_compatibility_residual(g, pts, conn))
    add("metric_compatibility_fields",
        max(G.compatibility_fields_residual(g, X, Y, rf.vector_field(), pts, conn) for X, Y in pairs))

    # curvature
    add("bianchi_first", G.first_bianchi_residual(conn, pts))
    add("bianchi_second", G.second_bianchi_residual(conn, pts))
    anti, pair = G.curvature_symmetry_residuals(g, pts)
    add("curvature_antisymmetry", anti)
    add("curvature_pair_symmetry", pair)
    add("ricci_symmetry", G.ricci_asymmetry(g, pts))
    if n >= 2:
        add("sectional_plane_invariance", _sectional_invariance(g, pts[:oracle_points], rng))

    # pointwise Hodge on T_p with gram g(p)
    gv = g.values(pts[:oracle_points])
    worst = {k: 0.0 for k in ("hodge_double_star", "hodge_wedge_inner", "hodge_star_inner",
                              "hodge_star_one", "hodge_star_volume", "volume_norm")}
    for p in range(gv.shape[2]):
        space = OrientedSpace(InnerProductSpace(AMatrix(gv[:, :, p, :])))
        for key, val in _hodge_residuals(space, rf).items():
            worst[key] = max(worst[key], val)
    for key, val in worst.items():
        add(key, val)
    add("hodge_forms_vs_pointwise", max(
        _mx(G.hodge_form(g, w).evaluate(g.context(p[None, :]))[:, 0, :]
            - G.hodge_form_pointwise(g, w, p).array)
        for w in [rf.form(k) for k in range(n + 1)] for p in pts[:oracle_points]))

    # field calculus
    X, Y, Z = rf.vector_field(), rf.vector_field(), rf.vector_field()
    f = rf.function()
    ev = lambda e: ex.eval_array(e, ctx)  # noqa: E731
    add("involution_derivation", _mx(ev(involution_function(apply_vf(X, f)))
                                     - ev(apply_vf(involution_field(X), involution_function(f)))))
    lhs = involution_field(lie_bracket(X, Y)).evaluate(ctx)
    add("involution_bracket", _mx(lhs - lie_bracket(involution_field(X), involution_field(Y)).evaluate(ctx)))
    jac = (lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X))
           + lie_bracket(Z, lie_bracket(X, Y)))
    add("jacobi", _mx(jac.evaluate(ctx)))
    cartan = 0.0
    for k in range(n + 1):
        w = rf.form(k)
        L = lie_derivative(X, w.to_tensor()).to_form()
        cartan = max(cartan, _mx(L.evaluate(ctx) - cartan_rhs(X, w).evaluate(ctx)))
    add("cartan", cartan)
    lhs, rhs = G.lie_volume_sides(g, X, pts)
    add("lie_volume", _mx(lhs - rhs))

    # Laplacian and Hessian, two paths each
    add("laplacian_dual_path", _mx(G.laplacian_fn_batch(g, f, pts) - G.laplacian_coordinate_batch(g, f, pts)))
    add("hessian_dual_path", _mx(G.hessian_batch(g, f, pts) - G.hessian_via_gradient_batch(g, f, pts)))

    # per-fiber classical oracle
    res = oracle_residuals(g, pts[:oracle_points], f=rf.function(), X=rf.vector_field(), form=rf.form(1))
    for key in sorted(res):
        add(f"oracle:{key}", res[key])

    results = {"samples": samples, "seed": seed, "nu": g0.nu.to_json(),
               "points": [[float(c) for c in p] for p in pts]}
    return rows, results


def _hodge_residuals(space: OrientedSpace, rf: RandomFields) -> dict[str, float]:
    n, N = space.dim, space.fibers
    nu = space.signature().values
    omega = volume_form(space)
    out = {}
    out["volume_norm"] = _mx(inner(space, omega, omega).values - nu)
    one = MultiVector.scalar(n, AElem.one(N))
    out["hodge_star_one"] = hodge(space, one).max_abs_diff(omega.scale(nu))
    out["hodge_star_volume"] = hodge(space, omega).max_abs_diff(one)
    ds = wi = si = 0.0
    for k in range(n + 1):
        a, b = rf.multivector(k, N), rf.multivector(k, N)
        sa, sb = hodge(space, a), hodge(space, b)
        sign = (-1) ** (k * (n - k))
        ds = max(ds, hodge(space, sa).max_abs_diff(a.scale(sign * nu)))
        wi = max(wi, wedge(a, sb).max_abs_diff(omega.scale(nu * inner(space, a, b).values)))
        si = max(si, _mx(inner(space, sa, sb).values - nu * np.conj(inner(space, a, b).values)))
    out["hodge_double_star"] = ds
    out["hodge_wedge_inner"] = wi
    out["hodge_star_inner"] = si
    return out


def _sectional_invariance(g: G.MetricField, pts: np.ndarray, rng: np.random.Generator) -> float:
    n, N = g.n, g.fibers
    worst = 0.0
    for p in pts:
        u = rng.normal(size=(n, N))
        v = rng.normal(size=(n, N))
        coef = rng.normal(size=(4, N)) + 1j * rng.normal(size=(4, N))
        a, b, c, d = coef
        if np.min(np.abs(a * d - b * c)) < 1e-3:
            continue
        try:
            K1 = G.sectional(g, p, u, v).values
            K2 = G.sectional(g, p, a * u + b * v, c * u + d * v).values
        except DegeneratePlane:
            continue
        worst = max(worst, _mx(K1 - K2) / max(1.0, _mx(K1)))
    return worst
