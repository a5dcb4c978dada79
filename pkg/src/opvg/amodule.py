"""Linear algebra on free finite-dimensional modules over C(X).

Matrices are stored as complex arrays of shape ``(rows, cols, N)``.  The
determinant and adjugate are computed by cofactor expansion, which only
needs ring operations and therefore never has to choose a pivot among
entries that may be nonzero yet non-invertible.  The helpers ending in
``_array`` accept any trailing shape, so the geometry code can push a
whole batch of points through at once.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .algebra import EPS_INV, EPS_SA, AElem, sign
from .errors import (
    DimMismatch,
    DimTooLarge,
    FiberCountMismatch,
    NotInvertible,
    NotSelfAdjoint,
    NotSquare,
    SingularMatrix,
)

MAX_DIM = 6


class AMatrix:
    __slots__ = ("_a",)

    def __init__(self, array):
        a = np.array(array, dtype=complex)
        if a.ndim != 3:
            raise ValueError("AMatrix array must have shape (rows, cols, fibers)")
        a.flags.writeable = False
        self._a = a

    @classmethod
    def from_elems(cls, rows: Sequence[Sequence[AElem]]) -> "AMatrix":
        n_f = {e.fibers for row in rows for e in row}
        if len(n_f) != 1:
            raise FiberCountMismatch("matrix entries disagree on fiber count")
        return cls(np.array([[e.values for e in row] for row in rows]))

    @classmethod
    def identity(cls, n: int, fibers: int) -> "AMatrix":
        return cls(np.broadcast_to(np.eye(n)[:, :, None], (n, n, fibers)))

    @classmethod
    def diag(cls, elems: Sequence[AElem]) -> "AMatrix":
        n, N = len(elems), elems[0].fibers
        a = np.zeros((n, n, N), dtype=complex)
        for i, e in enumerate(elems):
            a[i, i] = e.values
        return cls(a)

    @property
    def array(self) -> np.ndarray:
        return self._a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def fibers(self) -> int:
        return self._a.shape[2]

    @property
    def entries(self) -> list[AElem]:
        return [AElem(self._a[i, j]) for i in range(self.rows) for j in range(self.cols)]

    def entry(self, i: int, j: int) -> AElem:
        return AElem(self._a[i, j])

    def __matmul__(self, other: "AMatrix") -> "AMatrix":
        if self.cols != other.rows:
            raise DimMismatch(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        return AMatrix(np.einsum("ikn,kjn->ijn", self._a, other._a))

    def conj_transpose(self) -> "AMatrix":
        return AMatrix(np.conj(self._a.transpose(1, 0, 2)))

    def allclose(self, other: "AMatrix", atol: float = 1e-10) -> bool:
        return self._a.shape == other._a.shape and bool(np.all(np.abs(self._a - other._a) <= atol))

    def to_json(self):
        return [[self.entry(i, j).to_json() for j in range(self.cols)] for i in range(self.rows)]

    @classmethod
    def from_json(cls, data) -> "AMatrix":
        return cls.from_elems([[AElem.from_json(e) for e in row] for row in data])

    def __repr__(self):
        return f"AMatrix({self.rows}x{self.cols}, N={self.fibers})"


def det_array(m: np.ndarray) -> np.ndarray:
    """Determinant over the commutative algebra, batched over trailing axes."""
    n = m.shape[0]
    if m.shape[1] != n:
        raise NotSquare(f"matrix is {m.shape[0]}x{m.shape[1]}")
    if n > MAX_DIM:
        raise DimTooLarge(f"dimension {n} exceeds cap {MAX_DIM}")
    if n == 0:
        return np.ones(m.shape[2:], dtype=m.dtype)
    if n == 1:
        return m[0, 0].copy()
    if n == 2:
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if n == 3:
        return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
                - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
                + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    # Laplace expansion along the first row
    total = np.zeros(m.shape[2:], dtype=np.result_type(m, float))
    rest = list(range(1, n))
    for j in range(n):
        cols = [c for c in range(n) if c != j]
        minor = m[np.ix_(rest, cols)]
        term = m[0, j] * det_array(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def adjugate_array(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    if m.shape[1] != n:
        raise NotSquare(f"matrix is {m.shape[0]}x{m.shape[1]}")
    if n > MAX_DIM:
        raise DimTooLarge(f"dimension {n} exceeds cap {MAX_DIM}")
    adj = np.empty_like(m, dtype=np.result_type(m, float))
    if n == 1:
        adj[0, 0] = 1.0
        return adj
    for i in range(n):
        for j in range(n):
            rows = [r for r in range(n) if r != j]
            cols = [c for c in range(n) if c != i]
            cof = det_array(m[np.ix_(rows, cols)])
            adj[i, j] = cof if (i + j) % 2 == 0 else -cof
    return adj


def _first_bad_fiber(d: np.ndarray) -> int | None:
    mag = np.abs(d)
    scale = np.maximum(1.0, mag.max(axis=-1, keepdims=True))
    bad = mag <= EPS_INV * scale
    if bad.any():
        return int(np.argwhere(bad)[0][-1])
    return None


def inverse_array(m: np.ndarray) -> np.ndarray:
    d = det_array(m)
    i = _first_bad_fiber(d)
    if i is not None:
        raise SingularMatrix(i, complex(d[..., i].flat[0]))
    return adjugate_array(m) / d


def det(m: AMatrix) -> AElem:
    return AElem(det_array(m.array))


def inverse(m: AMatrix) -> AMatrix:
    if m.rows != m.cols:
        raise NotSquare(f"matrix is {m.rows}x{m.cols}")
    return AMatrix(inverse_array(m.array))


def congruence(t: AMatrix, gram: AMatrix) -> AMatrix:
    """Gram matrix in the basis e'_i = t_i^j e_j, i.e. T G (T*)^t."""
    return t @ gram @ t.conj_transpose()


class InnerProductSpace:
    """Free module of rank n with an algebra-valued inner product given by its Gram matrix.

    The product is linear in the first slot and conjugate-linear in the
    second.  By default every Gram entry must be self-adjoint, which is what
    metrics on manifolds require; pass ``self_adjoint_entries=False`` to
    allow general Hermitian Gram matrices.
    """

    def __init__(self, gram: AMatrix, self_adjoint_entries: bool = True):
        if gram.rows != gram.cols:
            raise NotSquare(f"gram is {gram.rows}x{gram.cols}")
        a = gram.array
        scale = max(1.0, float(np.abs(a).max()))
        herm = np.abs(a - np.conj(a.transpose(1, 0, 2)))
        if np.any(herm > EPS_SA * scale):
            i = int(np.argwhere(herm > EPS_SA * scale)[0][-1])
            raise NotSelfAdjoint(i, "gram matrix is not Hermitian")
        if self_adjoint_entries and np.any(np.abs(a.imag) > EPS_SA * scale):
            i = int(np.argwhere(np.abs(a.imag) > EPS_SA * scale)[0][-1])
            raise NotSelfAdjoint(i, "gram entry is not self-adjoint")
        d = det_array(a)
        bad = _first_bad_fiber(d)
        if bad is not None:
            raise SingularMatrix(bad, complex(d[bad]))
        self.gram = gram
        self.self_adjoint_entries = self_adjoint_entries

    @property
    def dim(self) -> int:
        return self.gram.rows

    @property
    def fibers(self) -> int:
        return self.gram.fibers

    def det(self) -> AElem:
        return det(self.gram)


def ip_eval(space: InnerProductSpace, x: Sequence[AElem], y: Sequence[AElem]) -> AElem:
    """<x, y> = sum_ij x_i y_j* g_ij."""
    n = space.dim
    if len(x) != n or len(y) != n:
        raise DimMismatch(f"coefficient vectors must have length {n}")
    xa = np.array([e.values for e in x])
    ya = np.array([e.values for e in y])
    return AElem(np.einsum("in,jn,ijn->n", xa, np.conj(ya), space.gram.array))


def reciprocal_basis(space: InnerProductSpace) -> AMatrix:
    """Row i holds the coefficients of e^i = g^{ij} e_j."""
    return inverse(space.gram)


def signature(space: InnerProductSpace) -> AElem:
    g = space.det()
    if not g.is_self_adjoint():
        raise NotSelfAdjoint(int(np.argmax(np.abs(g.values.imag))), "determinant")
    try:
        return sign(g)
    except NotInvertible as exc:
        raise SingularMatrix(exc.fiber, exc.value) from None
