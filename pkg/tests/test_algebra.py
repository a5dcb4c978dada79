import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opvg.algebra import (
    AElem,
    AlgebraSpec,
    abs_parts,
    arith,
    involution,
    is_invertible,
    sign,
    spectrum,
    sqrt_pos,
)
from opvg.errors import FiberCountMismatch, NotInvertible, NotPositive, NotSelfAdjoint

finite = st.floats(-1e3, 1e3, allow_nan=False)
cplx = st.builds(complex, finite, finite)


def elems(n=None, values=cplx):
    size = st.integers(1, 8) if n is None else st.just(n)
    return size.flatmap(lambda k: st.lists(values, min_size=k, max_size=k)).map(AElem)


def test_product_componentwise():
    assert AElem([1, 2]) * AElem([3, 4]) == AElem([3, 8])


def test_unit():
    a = AElem([1 + 2j, -3, 0.5])
    assert a * AElem.one(3) == a


def test_division_by_zero_fiber():
    with pytest.raises(NotInvertible) as e:
        AElem([2, 2]) / AElem([1, 0])
    assert e.value.fiber == 1


def test_fiber_count_mismatch():
    with pytest.raises(FiberCountMismatch):
        arith(AElem([1, 2]), AElem([1, 2, 3]), "add")


def test_involution_examples():
    assert involution(AElem([1 + 2j, 3])) == AElem([1 - 2j, 3])
    a = AElem([1.5, -2.0])
    assert involution(a) == a
    assert involution(1j * AElem([1, 1])) == AElem([-1j, -1j])


def test_spectrum_examples():
    assert spectrum(AElem([1, -1, 1])) == {1, -1}
    assert spectrum(AElem.one(4)) == {1}
    a = AElem([2j, 3])
    assert spectrum(a) == {2j, 3}
    assert all(abs(z) <= a.norm() for z in spectrum(a))


def test_sqrt_pos_examples():
    assert sqrt_pos(AElem([4, 9])) == AElem([2, 3])
    assert sqrt_pos(AElem([0.0])) == AElem([0.0])
    with pytest.raises(NotPositive):
        sqrt_pos(AElem([1, -1]))


def test_sqrt_pos_clamps_dust():
    assert sqrt_pos(AElem([-1e-14, 4])) == AElem([0, 2])


def test_abs_parts_examples():
    ab, pos, neg = abs_parts(AElem([-2, 3]))
    assert (ab, pos, neg) == (AElem([2, 3]), AElem([0, 3]), AElem([2, 0]))
    a = AElem([1, 5])
    assert abs_parts(a) == (a, a, AElem([0, 0]))
    ab, pos, neg = abs_parts(AElem([-1, -1]))
    assert (ab, pos, neg) == (AElem([1, 1]), AElem([0, 0]), AElem([1, 1]))
    with pytest.raises(NotSelfAdjoint):
        abs_parts(AElem([1j, 1]))


def test_is_invertible_examples():
    assert is_invertible(AElem([1, 2]))
    assert not is_invertible(AElem([1, 0]))
    assert is_invertible(AElem.one(1))


def test_json_round_trip():
    a = AElem([1 + 2j, -0.25])
    assert AElem.from_json(a.to_json()) == a
    with pytest.raises(ValueError):
        AElem.from_json([[1, 2, 3]])


def test_algebra_spec_validation():
    with pytest.raises(ValueError):
        AlgebraSpec(0)
    with pytest.raises(ValueError):
        AlgebraSpec(2, ("a", "a"))
    assert AlgebraSpec(2, ["a", "b"]).labels == ("a", "b")


@given(elems())
def test_c_star_identity(a):
    assert np.isclose((a.star * a).norm(), a.norm() ** 2, rtol=1e-12)


@given(elems(values=finite))
def test_self_adjoint_spectrum_is_real(a):
    assert all(z.imag == 0 for z in spectrum(a))


@given(elems(values=st.floats(0, 1e3)))
def test_sqrt_pos_squares_back(a):
    r = sqrt_pos(a)
    assert np.all(r.values.real >= 0)
    assert (r * r).allclose(a, 1e-12 * max(1.0, a.norm()))


@given(elems(values=finite))
def test_abs_parts_laws(a):
    ab, pos, neg = abs_parts(a)
    assert (pos - neg).allclose(a, 1e-12 * max(1, a.norm()))
    assert (pos * neg).allclose(AElem.zero(a.fibers), 1e-9 * max(1, a.norm()) ** 2)
    for x in (ab, pos, neg):
        assert np.all(x.values.real >= 0)


@given(elems(values=st.floats(0.5, 10) | st.floats(-10, -0.5)))
def test_sign_is_unitary_square_root_of_one(a):
    s = sign(a)
    assert s * s == AElem.one(a.fibers)
    assert (s * abs_parts(a)[0]).allclose(a, 1e-12)


@given(elems(3), elems(3))
def test_involution_antimultiplicative(a, b):
    assert (a * b).star.allclose(b.star * a.star, 1e-9)
    assert a.star.star == a
