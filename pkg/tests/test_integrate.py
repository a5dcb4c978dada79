import numpy as np
import pytest

from opvg import exprdsl as ex
from opvg import geometry as G
from opvg.algebra import AElem
from opvg.errors import DimMismatch, SupportViolation, WrongDegree
from opvg.fields import AFormField
from opvg.integrate import (
    BoxDomain,
    Functional,
    Quadrature,
    adjointness_residual,
    change_of_variables_check,
    form_pairing,
    form_pairing_inner,
    functional_quadrature,
    integrate_form,
    pettis_integral,
    pullback_form,
    stokes_residual,
)
from opvg.suite import RandomFields

UV = ("u", "v")
UNIT = BoxDomain(((0.0, 1.0), (0.0, 1.0)))
C = {"c": AElem([1.0, 2.0])}
BUMP = "(u*(1-u)*v*(1-v))^2"


def P(src, consts=C, coords=UV):
    return ex.parse(src, coords, consts)


def test_quadrature_rule():
    q = Quadrature(4, 3)
    x, w = q.rule_1d(0.0, 2.0)
    assert x.shape == (12,) and np.isclose(w.sum(), 2.0)
    pts, w = q.rule(((0, 1), (0, 2)))
    assert pts.shape == (144, 2) and np.isclose(w.sum(), 2.0)
    assert Quadrature.parse("10,4") == Quadrature(10, 4)
    with pytest.raises(ValueError):
        Quadrature(1, 1)


def test_quadrature_exact_for_polynomials():
    q = Quadrature(4, 1)
    x, w = q.rule_1d(0, 1)
    for k in range(8):
        assert np.isclose(w @ x ** k, 1 / (k + 1), rtol=1e-14)


def test_quadrature_convergence():
    f = P("exp(sin(3*u))", {}, ("u",))
    dom = BoxDomain(((0.0, 2.0),))
    ref = pettis_integral(f, dom, Quadrature(20, 16)).values[0]
    errs = [abs(pettis_integral(f, dom, Quadrature(4, s)).values[0] - ref) for s in (2, 4, 8)]
    # order-8 rule: halving the panel width divides the error by about 2^8
    assert errs[1] < errs[0] / 30 and errs[2] < errs[1] / 100


def test_pettis_examples():
    one_d = BoxDomain(((0.0, 1.0),))
    assert pettis_integral(P("c", C, ("u",)), one_d, constants=C).allclose(AElem([1, 2]), 1e-14)
    assert pettis_integral(P("u*c", C, ("u",)), one_d, constants=C).allclose(AElem([0.5, 1.0]), 1e-14)


def test_functional_commutation():
    rng = np.random.default_rng(0)
    consts = {"c": AElem([1.5, -0.5]), "k": AElem([0.3, 2.0])}
    lam = Functional((1.0, -1.0))
    for _ in range(20):
        f = P(f"c*sin({rng.uniform(1, 3):.3f}*u)*v + k*exp(u*v)", consts)
        a = lam(pettis_integral(f, UNIT, constants=consts))
        b = functional_quadrature(f, lam, UNIT, constants=consts)
        assert abs(a - b) < 1e-12
    with pytest.raises(DimMismatch):
        lam(AElem([1, 2, 3]))


def test_integrate_form_examples():
    vol = AFormField(2, 2, {(0, 1): ex.ONE})
    assert integrate_form(vol, UNIT).allclose(AElem([1.0]), 1e-14)
    assert integrate_form(AFormField(2, 2, {(0, 1): P("v")}), UNIT).allclose(AElem([0.5]), 1e-14)
    c = {"c": AElem([2, 3])}
    assert integrate_form(AFormField(2, 2, {(0, 1): P("c", c)}), UNIT, constants=c).allclose(AElem([2, 3]), 1e-13)
    with pytest.raises(WrongDegree):
        integrate_form(AFormField(2, 1, {(0,): ex.ONE}), UNIT)


def test_change_of_variables_examples():
    r = change_of_variables_check(ex.ONE, [P("2*u"), P("v + 1")], UNIT, image=BoxDomain(((0, 2), (1, 2))))
    assert r.residual.norm() < 1e-12 and r.value.allclose(AElem([2.0]), 1e-12)
    c = {"c": AElem([1.0, 3.0])}
    sector = BoxDomain(((1.0, 2.0), (0.0, np.pi / 2)))
    r = change_of_variables_check(P("c", c), [P("u*cos(v)"), P("u*sin(v)")], sector, constants=c)
    assert r.value.allclose(AElem(3 * np.pi / 4 * np.array([1.0, 3.0])), 1e-8)
    r = change_of_variables_check(P("u*v"), [P("u"), P("v")], UNIT, image=UNIT)
    assert r.residual.norm() < 1e-14


def test_pullback_and_functional_commute():
    lam = Functional((0.25, 2.0))
    c = {"c": AElem([1.0 + 1j, -2.0])}
    w = AFormField(2, 2, {(0, 1): P("c*u*v^2", c)})
    Gm = [P("u + v^2"), P("sin(v) + 1")]
    pulled = pullback_form(w, Gm)
    pts = np.array([[0.3, 0.4], [0.9, 0.1]])
    ctx = ex.EvalContext(tuple(pts.T), c, 2)
    before = lam(pulled.evaluate(ctx)[0])
    # Lambda first: replace c by the scalar Lambda(c) and pull back the scalar form
    lc = {"c": AElem([lam(c["c"])])}
    after = pullback_form(AFormField(2, 2, {(0, 1): P("c*u*v^2", lc)}), Gm).evaluate(
        ex.EvalContext(tuple(pts.T), lc, 1))[0, :, 0]
    assert np.max(np.abs(before - after)) < 1e-12


def test_stokes_examples():
    w = AFormField(2, 1, {(1,): P("u*v")})
    r = stokes_residual(w, UNIT)
    assert r.interior.allclose(AElem([0.5]), 1e-12) and r.boundary.allclose(AElem([0.5]), 1e-12)
    assert r.residual.norm() < 1e-10
    w = AFormField(2, 1, {(0,): P(f"({BUMP})^2*v"), (1,): P(f"{BUMP}*u")})
    r = stokes_residual(w, UNIT)
    assert r.interior.norm() < 1e-12 and r.boundary.norm() < 1e-12
    w = AFormField(2, 1, {(1,): P("c*u")})
    r = stokes_residual(w, UNIT, constants=C)
    assert r.interior.allclose(AElem([1.0, 2.0]), 1e-10) and r.residual.norm() < 1e-10
    with pytest.raises(WrongDegree):
        stokes_residual(AFormField(2, 2), UNIT)


def test_stokes_random_3d():
    rng = np.random.default_rng(3)
    rf = RandomFields(3, 2, rng)
    dom = BoxDomain(((0.0, 1.0), (-1.0, 0.5), (0.2, 1.0)))
    for _ in range(3):
        r = stokes_residual(rf.form(2), dom, constants=rf.constants)
        assert r.residual.norm() < 1e-8


def euclid2():
    return G.MetricField.from_strings([["1", "0"], ["0", "1"]], UV, {}, 1, UNIT)


def fibered2():
    return G.MetricField.from_strings([["r^2", "0"], ["0", "r^2*(1 + u*v)"]], UV, {"r": AElem([1.0, 2.0])}, 2, UNIT)


@pytest.mark.parametrize("make", [euclid2, fibered2])
def test_pairings_agree(make):
    g = make()
    consts = g.constants
    a = AFormField(2, 1, {(0,): P("u*v", consts), (1,): P("1 + u", consts)})
    b = AFormField(2, 1, {(0,): P("v^2", consts), (1,): P("u - v", consts)})
    lhs = form_pairing(g, a, b, UNIT).values
    rhs = form_pairing_inner(g, a, b, UNIT).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@pytest.mark.parametrize("make", [euclid2, fibered2])
def test_adjointness(make):
    g = make()
    consts = g.constants
    b = AFormField.scalar(2, P(f"1000*{BUMP}*u", consts))
    a = AFormField(2, 1, {(0,): P(f"1000*{BUMP}", consts), (1,): P(f"1000*{BUMP}*sin(u)", consts)})
    r = adjointness_residual(g, b, a, UNIT)
    assert r.d_side.norm() > 1e-3
    assert r.residual.norm() < 1e-5


def test_adjointness_errors():
    g = euclid2()
    zero = AFormField(2, 1)
    r = adjointness_residual(g, AFormField.scalar(2, P(f"{BUMP}")), zero, UNIT)
    assert r.residual.norm() == 0
    with pytest.raises(SupportViolation):
        adjointness_residual(g, AFormField.scalar(2, P("u")), AFormField(2, 1, {(0,): P(BUMP)}), UNIT)
    with pytest.raises(WrongDegree):
        adjointness_residual(g, zero, zero, UNIT)
