"""Exterior powers of a free module over C(X) and the Hodge star.

A `MultiVector` of degree k stores one algebra element per strictly
increasing index tuple, in the basis e_{i1} ^ ... ^ e_{ik} of the module's
fixed basis (e_i).  Absent keys are zero.
"""

from __future__ import annotations

import json
from functools import lru_cache
from itertools import combinations
from typing import Mapping

import numpy as np

from .algebra import AElem, sqrt_pos
from .amodule import AMatrix, InnerProductSpace, det_array, inverse_array, signature
from .errors import DimMismatch, FiberCountMismatch


@lru_cache(maxsize=None)
def basis(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing k-tuples of range(n), lexicographic."""
    return tuple(combinations(range(n), k))


@lru_cache(maxsize=None)
def basis_index(n: int, k: int) -> dict[tuple[int, ...], int]:
    return {key: i for i, key in enumerate(basis(n, k))}


def sort_sign(idx) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting idx, and the sorted tuple; sign 0 on repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    s = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                s = -s
    return s, tuple(idx)


class MultiVector:
    __slots__ = ("dim", "degree", "_c")

    def __init__(self, dim: int, degree: int, coeffs: Mapping[tuple[int, ...], AElem], fibers: int | None = None):
        if not 0 <= degree <= dim:
            raise ValueError(f"degree {degree} outside [0, {dim}]")
        self.dim = dim
        self.degree = degree
        if fibers is None:
            if not coeffs:
                raise ValueError("fibers must be given for an empty MultiVector")
            fibers = next(iter(coeffs.values())).fibers
        arr = np.zeros((len(basis(dim, degree)), fibers), dtype=complex)
        index = basis_index(dim, degree)
        for key, val in coeffs.items():
            key = tuple(int(i) for i in key)
            if len(key) != degree or any(i < 0 or i >= dim for i in key):
                raise ValueError(f"bad index tuple {key} for degree {degree} in dimension {dim}")
            s, skey = sort_sign(key)
            if s == 0:
                continue
            v = val.values if isinstance(val, AElem) else np.broadcast_to(np.asarray(val, dtype=complex), (fibers,))
            if v.shape != (fibers,):
                raise FiberCountMismatch("coefficient fiber count mismatch")
            arr[index[skey]] += s * v
        arr.flags.writeable = False
        self._c = arr

    @classmethod
    def from_array(cls, dim: int, degree: int, arr: np.ndarray) -> "MultiVector":
        mv = cls.__new__(cls)
        mv.dim, mv.degree = dim, degree
        a = np.array(arr, dtype=complex)
        if a.shape[0] != len(basis(dim, degree)):
            raise ValueError("coefficient array has the wrong length")
        a.flags.writeable = False
        mv._c = a
        return mv

    @classmethod
    def scalar(cls, dim: int, a: AElem) -> "MultiVector":
        return cls(dim, 0, {(): a})

    @classmethod
    def basis_vector(cls, dim: int, key, fibers: int) -> "MultiVector":
        return cls(dim, len(key), {tuple(key): AElem.one(fibers)})

    @property
    def array(self) -> np.ndarray:
        return self._c

    @property
    def fibers(self) -> int:
        return self._c.shape[1]

    @property
    def coeffs(self) -> dict[tuple[int, ...], AElem]:
        return {key: AElem(self._c[i]) for i, key in enumerate(basis(self.dim, self.degree))
                if np.any(self._c[i] != 0)}

    def __getitem__(self, key) -> AElem:
        s, skey = sort_sign(tuple(key))
        if s == 0:
            return AElem.zero(self.fibers)
        return AElem(s * self._c[basis_index(self.dim, self.degree)[skey]])

    def _check(self, other):
        if not isinstance(other, MultiVector):
            return NotImplemented
        if (other.dim, other.degree) != (self.dim, self.degree):
            raise DimMismatch("multivectors of different dimension or degree")
        return other._c

    def __add__(self, other):
        o = self._check(other)
        return o if o is NotImplemented else MultiVector.from_array(self.dim, self.degree, self._c + o)

    def __sub__(self, other):
        o = self._check(other)
        return o if o is NotImplemented else MultiVector.from_array(self.dim, self.degree, self._c - o)

    def __neg__(self):
        return MultiVector.from_array(self.dim, self.degree, -self._c)

    def scale(self, a) -> "MultiVector":
        v = a.values if isinstance(a, AElem) else a
        return MultiVector.from_array(self.dim, self.degree, self._c * v)

    def __rmul__(self, a):
        return self.scale(a)

    def max_abs_diff(self, other: "MultiVector") -> float:
        return float(np.max(np.abs(self._c - self._check(other)), initial=0.0))

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "coeffs": {json.dumps(list(k)): v.to_json() for k, v in self.coeffs.items()},
        }

    @classmethod
    def from_json(cls, dim: int, data: dict, fibers: int) -> "MultiVector":
        coeffs = {tuple(json.loads(k)): AElem.from_json(v) for k, v in data["coeffs"].items()}
        return cls(dim, int(data["degree"]), coeffs, fibers=fibers)

    def __repr__(self):
        return f"MultiVector(dim={self.dim}, degree={self.degree}, coeffs={self.coeffs})"


@lru_cache(maxsize=None)
def wedge_table(n: int, k: int, l: int) -> tuple[tuple[int, int, int, int], ...]:
    """Rows (i, j, out, sign): basis_k[i] ^ basis_l[j] = sign * basis_{k+l}[out]."""
    if k + l > n:
        return ()
    out_index = basis_index(n, k + l)
    rows = []
    for i, a in enumerate(basis(n, k)):
        for j, b in enumerate(basis(n, l)):
            s, key = sort_sign(a + b)
            if s:
                rows.append((i, j, out_index[key], s))
    return tuple(rows)


def wedge_arrays(n: int, k: int, a: np.ndarray, l: int, b: np.ndarray) -> np.ndarray:
    """Wedge of coefficient arrays (leading axis = basis), batched over trailing axes."""
    out = np.zeros((len(basis(n, k + l)) if k + l <= n else 0,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]),
                   dtype=np.result_type(a, b))
    for i, j, o, s in wedge_table(n, k, l):
        out[o] += s * a[i] * b[j]
    return out


def wedge(a: MultiVector, b: MultiVector) -> MultiVector:
    if a.dim != b.dim:
        raise DimMismatch(f"dimensions {a.dim} and {b.dim}")
    if a.fibers != b.fibers:
        raise FiberCountMismatch("multivectors have different fiber counts")
    k = a.degree + b.degree
    if k > a.dim:
        # Overflowing degree: the zero element of the top power.
        return MultiVector(a.dim, a.dim, {}, fibers=a.fibers)
    return MultiVector.from_array(a.dim, k, wedge_arrays(a.dim, a.degree, a.array, b.degree, b.array))


class OrientedSpace:
    """An inner product space whose fixed basis order is declared proper.

    ``volume`` overrides the canonical volume form; the forms-level Hodge
    star on a manifold uses this to pair the induced product on covectors
    with the tangent-space volume element sqrt|g| dx^1 ^ ... ^ dx^n.
    """

    def __init__(self, base: InnerProductSpace, volume: MultiVector | None = None):
        self.base = base
        self._volume = volume

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def fibers(self) -> int:
        return self.base.fibers

    @property
    def gram(self) -> np.ndarray:
        return self.base.gram.array

    def signature(self) -> AElem:
        return signature(self.base)


def gram_k_array(gram: np.ndarray, k: int) -> np.ndarray:
    """Gram matrix of the degree-k basis: entries det(<e_i, e_j>) over index sub-blocks."""
    n = gram.shape[0]
    keys = basis(n, k)
    out = np.empty((len(keys), len(keys)) + gram.shape[2:], dtype=np.result_type(gram, float))
    for a, I in enumerate(keys):
        for b, J in enumerate(keys):
            out[a, b] = det_array(gram[np.ix_(I, J)])
    return out


def gram_k(space: OrientedSpace, k: int) -> AMatrix:
    if not 0 <= k <= space.dim:
        raise ValueError(f"degree {k} outside [0, {space.dim}]")
    return AMatrix(gram_k_array(space.gram, k))


def inner(space: OrientedSpace, a: MultiVector, b: MultiVector) -> AElem:
    """Induced product <a, b> on the degree-k power; conjugate-linear in b."""
    if a.degree != b.degree or a.dim != b.dim or a.dim != space.dim:
        raise DimMismatch("inner product needs same-degree multivectors of the space's dimension")
    G = gram_k_array(space.gram, a.degree)
    return AElem(np.einsum("in,jn,ijn->n", a.array, np.conj(b.array), G))


def canonical_volume(space: OrientedSpace) -> MultiVector:
    """sqrt|g| e^1 ^ ... ^ e^n, written in the e-basis."""
    n, N = space.dim, space.fibers
    g = AElem(det_array(space.gram))
    root = sqrt_pos(AElem(np.abs(g.values.real)))
    recip = inverse_array(space.gram)  # row i: coefficients of e^i
    top = MultiVector.scalar(n, AElem.one(N))
    for i in range(n):
        top = wedge(top, MultiVector.from_array(n, 1, recip[i]))
    return top.scale(root)


def volume_form(space: OrientedSpace) -> MultiVector:
    if space._volume is not None:
        return space._volume
    return canonical_volume(space)


def hodge(space: OrientedSpace, b: MultiVector) -> MultiVector:
    """The unique x of degree n-k with <a, x> = nu <b ^ a, Omega> for every a."""
    n, k, N = space.dim, b.degree, space.fibers
    if b.dim != n:
        raise DimMismatch(f"multivector dimension {b.dim} vs space dimension {n}")
    nu = space.signature().values
    omega = volume_form(space)
    G_top = gram_k_array(space.gram, n)[0, 0]
    keys = basis(n, n - k)
    m = np.empty((len(keys), N), dtype=complex)
    for idx in range(len(keys)):
        e = np.zeros((len(keys), N))
        e[idx] = 1.0
        top = wedge_arrays(n, k, b.array, n - k, e)[0]
        m[idx] = nu * top * np.conj(omega.array[0]) * G_top
    G = gram_k_array(space.gram, n - k)
    # G conj(x) = m, fiber by fiber
    sol = np.linalg.solve(np.moveaxis(G, -1, 0), np.moveaxis(m, -1, 0)[..., None])[..., 0]
    return MultiVector.from_array(n, n - k, np.conj(np.moveaxis(sol, 0, -1)))
