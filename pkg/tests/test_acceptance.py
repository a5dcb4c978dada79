"""Acceptance criteria 1-9.

Each test records one line in LEDGER (printed in the terminal summary and
to stdout) with its worst residual against the pinned tolerance.
"""

import glob
import os
import subprocess
import sys

import numpy as np

from exprgen import random_expr
from opvg import exprdsl as ex
from opvg import geometry as G
from opvg.algebra import AElem
from opvg.amodule import AMatrix, InnerProductSpace
from opvg.classical import FiberGeometry, oracle_residuals
from opvg.domain import BoxDomain
from opvg.exterior import MultiVector, OrientedSpace, basis, hodge, inner, volume_form, wedge
from opvg.fields import (
    AFormField,
    apply_vf,
    cartan_rhs,
    involution_field,
    involution_function,
    lie_bracket,
    lie_derivative,
)
from opvg.integrate import (
    Functional,
    Quadrature,
    adjointness_residual,
    change_of_variables_check,
    functional_quadrature,
    pettis_integral,
    stokes_residual,
)
from opvg.scene import load_scene
from opvg.suite import RandomFields, extended_metric

LEDGER: dict[str, str] = {}
SCENES = sorted(glob.glob(os.path.join(os.path.dirname(__file__), os.pardir, "scenes", "*.json")))
COORDS = ("u", "v", "w")


def record(key: str, title: str, checks: list[tuple[str, float, float]]) -> None:
    ok = all(np.isfinite(r) and r < tol for _, r, tol in checks)
    detail = "; ".join(f"{name} {r:.2e} < {tol:.0e}" if np.isfinite(r) and r < tol
                       else f"{name} {r:.2e} >= {tol:.0e}" for name, r, tol in checks)
    line = f"[{'PASS' if ok else 'FAIL'}] {key} {title}: {detail}"
    LEDGER[key] = line
    print(line)
    assert ok, line


def mx(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


def random_metric(rng, n: int, N: int) -> G.MetricField:
    """Diagonally dominant polynomial/trig metric on [0,1]^n with 3-fiber constants.

    One diagonal entry carries a sign constant, so the fibers mix Riemannian
    and Lorentzian signatures.
    """
    coords = COORDS[:n]
    consts = {
        "s": AElem(rng.choice([-1.0, 1.0], size=N)),
        "a": AElem(rng.uniform(0.5, 1.5, size=N)),
        "b": AElem(rng.uniform(-0.3, 0.3, size=N)),
    }

    def mono():
        i, j = rng.integers(n, size=2)
        c = round(float(rng.uniform(0.2, 0.6)), 3)
        return rng.choice([f"{c}*{coords[i]}*{coords[j]}", f"{c}*sin({coords[i]} + {coords[j]})",
                           f"{c}*cos(2*{coords[i]})*{coords[j]}^2"])

    rows = [["0"] * n for _ in range(n)]
    for i in range(n):
        diag = f"(2 + a*{mono()})"
        rows[i][i] = f"s*{diag}" if i == 0 else diag
        for j in range(i + 1, n):
            rows[i][j] = rows[j][i] = f"b*{mono()}"
    return G.MetricField.from_strings(rows, coords, consts, N, BoxDomain(((0.0, 1.0),) * n))


def random_gram(rng, n: int, N: int) -> np.ndarray:
    a = rng.normal(size=(n, n, N))
    g = a + a.transpose(1, 0, 2)
    g += np.eye(n)[:, :, None] * rng.choice([-1.0, 1.0], size=(n, 1, N)) * rng.uniform(0.5, 3, size=(n, 1, N))
    return g


# ---------------------------------------------------------------------------


def test_ac1_signature(scene_path):
    worst = 0.0
    rng = np.random.default_rng(1)
    for n in range(1, 5):
        coords = ("t", "x", "y", "z")[:n]
        for q in range(n + 1):
            neg = set(rng.choice(n, size=q, replace=False).tolist())
            rows = [["0"] * n for _ in range(n)]
            for i in range(n):
                mag = f"({rng.uniform(0.5, 3):.3f} + {coords[i]}^2)"
                rows[i][i] = f"-{mag}" if i in neg else mag
            g = G.MetricField.from_strings(rows, coords, {}, 1, BoxDomain(((-1.0, 1.0),) * n))
            assert g.nu == AElem([(-1.0) ** q])
            worst = max(worst, mx(g.nu.values - (-1) ** q))
    s = load_scene(scene_path("fibered_signature"))
    grid = s.domain.grid(6)
    per_point = max(mx(G.signature_field(s.metric, p[None, :]).values - np.array([1.0, -1.0])) for p in grid)
    const = mx(G.signature_field(s.metric, grid).values - np.array([1.0, -1.0]))
    record("AC1", "signature", [("(-1)^q exact", worst, 1e-12),
                                ("fibered per point", per_point, 1e-12),
                                ("fibered constancy", const, 1e-12)])


def test_ac2_hodge_suite():
    rng = np.random.default_rng(2)
    worst = dict.fromkeys(["double star", "wedge-inner", "star isometry", "<Omega,Omega>", "*1", "*Omega"], 0.0)
    for _ in range(100):
        n, N = int(rng.integers(1, 5)), int(rng.integers(1, 9))
        sp = OrientedSpace(InnerProductSpace(AMatrix(random_gram(rng, n, N))))
        nu = sp.signature().values
        om = volume_form(sp)
        one = MultiVector.scalar(n, AElem.one(N))
        worst["<Omega,Omega>"] = max(worst["<Omega,Omega>"], mx(inner(sp, om, om).values - nu))
        worst["*1"] = max(worst["*1"], hodge(sp, one).max_abs_diff(om.scale(nu)))
        worst["*Omega"] = max(worst["*Omega"], hodge(sp, om).max_abs_diff(one))
        for k in range(n + 1):
            size = (len(basis(n, k)), N)
            a = MultiVector.from_array(n, k, rng.normal(size=size) + 1j * rng.normal(size=size))
            b = MultiVector.from_array(n, k, rng.normal(size=size) + 1j * rng.normal(size=size))
            sa, sb = hodge(sp, a), hodge(sp, b)
            ab = inner(sp, a, b).values
            worst["double star"] = max(worst["double star"],
                                       hodge(sp, sa).max_abs_diff(a.scale((-1) ** (k * (n - k)) * nu)))
            worst["wedge-inner"] = max(worst["wedge-inner"], wedge(a, sb).max_abs_diff(om.scale(nu * ab)))
            worst["star isometry"] = max(worst["star isometry"], mx(inner(sp, sa, sb).values - nu * np.conj(ab)))
    record("AC2", "Hodge suite (100 grams)", [(k, v, 1e-9) for k, v in worst.items()])


def test_ac3_sphere(scene_path):
    s = load_scene(scene_path("sphere_fibered"))
    rng = np.random.default_rng(3)
    rf = RandomFields(2, 2, rng)
    g = extended_metric(s.metric, rf.constants)
    pts = s.domain.sample(rng, 16)
    lc = G.LeviCivita(g)
    tors = max(mx(G.torsion_batch(lc, rf.vector_field(), rf.vector_field(), pts)) for _ in range(5))
    compat = max(G.metric_compatibility_residual(g, pts),
                 max(G.compatibility_fields_residual(g, rf.vector_field(), rf.vector_field(),
                                                     rf.vector_field(), pts) for _ in range(3)))
    r = np.array([1.0, 2.0])
    K = max(mx(G.sectional(g, p, np.eye(2)[0], np.eye(2)[1]).values - 1 / r ** 2) for p in pts)
    _, _, Ric, S = G.curvature_batch(g, pts)
    Sres = mx(S - 2 / r ** 2)
    Rres = mx(Ric - g.values(pts) / r ** 2)
    cc = G.constant_curvature_residual(g, pts, 1 / r ** 2, rng=rng)
    record("AC3", "sphere r=(1,2)", [("torsion", tors, 1e-9), ("compatibility", compat, 1e-9),
                                     ("K=(1,0.25)", K, 1e-8), ("S=(2,0.5)", Sres, 1e-8),
                                     ("Ric=g/r^2", Rres, 1e-8), ("constant curvature", cc, 1e-8)])


def test_ac4_bianchi():
    rng = np.random.default_rng(4)
    b1 = b2 = sym = 0.0
    for n in (2, 3, 2, 3, 3):
        g = random_metric(rng, n, 3)
        pts = g.domain.sample(rng, 16)
        b1 = max(b1, G.first_bianchi_residual(g, pts))
        b2 = max(b2, G.second_bianchi_residual(g, pts))
        anti, pair = G.curvature_symmetry_residuals(g, pts)
        sym = max(sym, anti, pair)
    record("AC4", "Bianchi on 5 random metrics", [("first Bianchi", b1, 1e-8), ("second Bianchi", b2, 1e-6),
                                                  ("curvature symmetries", sym, 1e-8)])


def test_ac5_oracle():
    rng = np.random.default_rng(5)
    worst: dict[str, float] = {}
    for path in SCENES:
        s = load_scene(path)
        n = s.dimension
        rf = RandomFields(n, s.fibers, rng)
        g = extended_metric(s.metric, rf.constants)
        pts = s.domain.sample(rng, 2)
        res = oracle_residuals(g, pts, f=rf.function(), X=rf.vector_field(), form=rf.form(1 if n > 1 else 0))
        fibers = [FiberGeometry(g, x) for x in range(g.fibers)]
        for k in range(n + 1):
            w = rf.form(k)
            star = G.hodge_form(g, w)
            for p in pts:
                ctx = g.context(p[None, :])
                coeffs, lib = w.evaluate(ctx)[:, 0, :], star.evaluate(ctx)[:, 0, :]
                for x, fg in enumerate(fibers):
                    ref = fg.hodge(dict(zip(basis(n, k), coeffs[:, x])), k, p)
                    res["hodge"] = max(res["hodge"], mx(lib[:, x] - ref))
        for key, val in res.items():
            worst[key] = max(worst.get(key, 0.0), val)
    names = ["christoffel", "riemann", "ricci", "scalar", "sectional", "nu", "gradient", "hessian",
             "divergence", "laplacian", "hodge"]
    record("AC5", f"fiberwise oracle ({len(SCENES)} scenes)", [(k, worst[k], 1e-10) for k in names])


def test_ac6_integration():
    rng = np.random.default_rng(6)
    q = Quadrature(8, 4)
    # real constants keep sqrt/log arguments on the positive axis; z adds complex coefficients
    consts = {"c": AElem([0.7, -1.2]), "k": AElem([1.5, 0.3]), "z": AElem([1.5 + 0.5j, -0.3j])}
    z = ex.AConst("z")
    stokes = 0.0
    for n in (2, 3):
        dom = BoxDomain(((0.0, 1.0),) * n)
        for _ in range(10):
            comps = {I: ex.mul(z, random_expr(rng, COORDS[:n], ("c", "k"), 3)) for I in basis(n, n - 1)}
            r = stokes_residual(AFormField(n, n - 1, comps), dom, q, consts)
            stokes = max(stokes, r.residual.norm())
    c = {"c": AElem([1.0, 3.0])}
    polar = change_of_variables_check(ex.AConst("c"), [ex.parse("u*cos(v)", COORDS[:2]),
                                                       ex.parse("u*sin(v)", COORDS[:2])],
                                      BoxDomain(((1.0, 2.0), (0.0, np.pi / 2))), q, c)
    cov = mx(polar.value.values - 3 * np.pi / 4 * np.array([1.0, 3.0]))
    pettis = 0.0
    dom = BoxDomain(((0.0, 1.0), (0.0, 1.0)))
    for _ in range(100):
        f = ex.mul(z, random_expr(rng, COORDS[:2], ("c", "k"), 3))
        lam = Functional(tuple(rng.normal(size=2) + 1j * rng.normal(size=2)))
        a = lam(pettis_integral(f, dom, q, consts))
        b = functional_quadrature(f, lam, dom, q, consts)
        pettis = max(pettis, abs(a - b) / max(1.0, abs(a)))
    record("AC6", "integration", [("Stokes (20 forms)", stokes, 1e-8), ("polar (3pi/4)c", cov, 1e-8),
                                  ("Pettis functional", pettis, 1e-12)])


def test_ac7_analysis(scene_path):
    rng = np.random.default_rng(7)
    unit = BoxDomain(((0.0, 1.0), (0.0, 1.0)))
    bump = "1000*(u*(1-u)*v*(1-v))^2"
    metrics = [
        G.MetricField.from_strings([["1", "0"], ["0", "1"]], ("u", "v"), {}, 1, unit),
        G.MetricField.from_strings([["r^2", "0"], ["0", "r^2"]], ("u", "v"), {"r": AElem([1.0, 2.0])}, 2, unit),
        G.MetricField.from_strings([["r^2*(1 + u^2)", "0.2*u*v"], ["0.2*u*v", "2 + sin(v)"]], ("u", "v"),
                                   {"r": AElem([1.0, 2.0, 0.5])}, 3, unit),
    ]
    adj = 0.0
    for g in metrics:
        rf = RandomFields(2, g.fibers, rng)
        g = extended_metric(g, rf.constants)
        for _ in range(2):
            w = ex.parse(bump, ("u", "v"))
            b = AFormField.scalar(2, ex.mul(w, rf.function()))
            a = AFormField(2, 1, {(i,): ex.mul(w, rf.function()) for i in range(2)})
            r = adjointness_residual(g, b, a, unit, Quadrature(10, 4))
            assert r.d_side.norm() > 1e-2
            adj = max(adj, r.residual.norm())
    dual = 0.0
    for path in SCENES:
        s = load_scene(path)
        rf = RandomFields(s.dimension, s.fibers, rng)
        g = extended_metric(s.metric, rf.constants)
        pts = s.domain.sample(rng, 8)
        for _ in range(3):
            f = rf.function()
            dual = max(dual, mx(G.laplacian_fn_batch(g, f, pts) - G.laplacian_coordinate_batch(g, f, pts)))
    e = load_scene(scene_path("euclidean2d"))
    pts = e.domain.sample(rng, 8)
    f = e.functions["r2"]
    lap = max(mx(G.laplacian_fn_batch(e.metric, f, pts) + 4), mx(G.laplacian_coordinate_batch(e.metric, f, pts) + 4))
    record("AC7", "analysis", [("adjointness", adj, 1e-5), ("Laplacian dual path", dual, 1e-8),
                               ("Laplacian(u^2+v^2)=-4", lap, 1e-12)])


def test_ac8_field_calculus(scene_path):
    rng = np.random.default_rng(8)
    bases = [random_metric(rng, n, 3) for n in (2, 3, 2, 3, 2)]
    bases += [load_scene(scene_path(n)).metric for n in ("sphere_fibered", "warped3d", "minkowski4d",
                                                         "polar", "fibered_signature")]
    worst = dict.fromkeys(["involution derivation", "involution bracket", "Cartan", "Jacobi", "L_X vol = div X vol"], 0.0)
    combos = 0
    for g0 in bases:
        for _ in range(10):
            n = g0.n
            rf = RandomFields(n, g0.fibers, rng)
            g = extended_metric(g0, rf.constants)
            pts = g0.domain.sample(rng, 4)
            ctx = g.context(pts)
            X, Y, Z, f = rf.vector_field(), rf.vector_field(), rf.vector_field(), rf.function()
            ev = lambda e: ex.eval_array(e, ctx)  # noqa: E731
            worst["involution derivation"] = max(worst["involution derivation"], mx(
                ev(involution_function(apply_vf(X, f))) - ev(apply_vf(involution_field(X), involution_function(f)))))
            worst["involution bracket"] = max(worst["involution bracket"], mx(
                involution_field(lie_bracket(X, Y)).evaluate(ctx)
                - lie_bracket(involution_field(X), involution_field(Y)).evaluate(ctx)))
            jac = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y))
            worst["Jacobi"] = max(worst["Jacobi"], mx(jac.evaluate(ctx)))
            w = rf.form(int(rng.integers(n + 1)))
            L = lie_derivative(X, w.to_tensor()).to_form()
            worst["Cartan"] = max(worst["Cartan"], mx(L.evaluate(ctx) - cartan_rhs(X, w).evaluate(ctx)))
            lhs, rhs = G.lie_volume_sides(g, X, pts)
            worst["L_X vol = div X vol"] = max(worst["L_X vol = div X vol"], mx(lhs - rhs))
            combos += 1
    assert combos == 100
    record("AC8", "field calculus (100 combinations)", [(k, v, 1e-8) for k, v in worst.items()])


def test_ac9_dsl_and_cli(scene_path, tmp_path):
    rng = np.random.default_rng(9)
    consts = {"c": AElem([0.7, 1.3]), "k": AElem([2.0, 0.4])}
    h = 1e-5
    fd = 0.0
    trips = 0
    for _ in range(200):
        e = random_expr(rng, COORDS, ("c", "k"), 5)
        p = rng.uniform(0.2, 1.0, size=3)
        i = int(rng.integers(3))
        qp, qm = p.copy(), p.copy()
        qp[i] += h
        qm[i] -= h
        f = lambda q: ex.eval_array(e, ex.EvalContext(tuple(q), consts, 2))  # noqa: E731
        num = (f(qp) - f(qm)) / (2 * h)
        an = ex.eval_array(ex.diff(e, i), ex.EvalContext(tuple(p), consts, 2))
        fd = max(fd, mx(np.abs(an - num) / np.maximum(1.0, np.abs(num))))
        e2 = random_expr(rng, COORDS, ("c", "k"), 5, allow_conj=True)
        trips += ex.parse(ex.to_source(e2), COORDS, consts) != e2
    outs = []
    for run in range(2):
        out = tmp_path / f"report{run}.json"
        subprocess.run([sys.executable, "-m", "opvg.cli", "check", scene_path("sphere_fibered"),
                        "--samples", "6", "--seed", "11", "--output", str(out)], check=True)
        outs.append(out.read_bytes())
    record("AC9", "DSL and CLI", [("diff vs FD (200 exprs)", fd, 1e-6),
                                  ("round-trip mismatches", float(trips), 0.5),
                                  ("report byte diff", float(outs[0] != outs[1]), 0.5)])
