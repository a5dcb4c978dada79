"""The commutative C*-algebra C(X) for a finite set X.

An element is a vector of complex numbers, one per point ("fiber") of X.
Products, sums and the involution act fiber by fiber; the norm is the sup
norm.  Everything else in the package uses `AElem` as its scalar type,
and internally works on numpy arrays whose *last* axis is the fiber axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    FiberCountMismatch,
    NotInvertible,
    NotPositive,
    NotSelfAdjoint,
)

EPS_INV = 1e-10
EPS_SA = 1e-10
EPS_POS = 1e-12
EPS_FC = 1e-12


@dataclass(frozen=True)
class AlgebraSpec:
    fibers: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.fibers, int) or self.fibers < 1:
            raise ValueError(f"fibers must be a positive integer, got {self.fibers!r}")
        if self.labels is not None:
            labels = tuple(self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != self.fibers:
                raise ValueError("labels must have one entry per fiber")
            if len(set(labels)) != len(labels):
                raise ValueError("fiber labels must be distinct")


class AElem:
    """Immutable element of C(X), |X| = N."""

    __slots__ = ("_v",)
    __array_priority__ = 1000

    def __init__(self, values):
        v = np.array(values, dtype=complex).reshape(-1)
        if v.size == 0:
            raise ValueError("an algebra element needs at least one fiber")
        v.flags.writeable = False
        self._v = v

    @classmethod
    def const(cls, value, fibers: int) -> "AElem":
        return cls(np.full(fibers, value, dtype=complex))

    @classmethod
    def one(cls, fibers: int) -> "AElem":
        return cls.const(1.0, fibers)

    @classmethod
    def zero(cls, fibers: int) -> "AElem":
        return cls.const(0.0, fibers)

    @property
    def values(self) -> np.ndarray:
        return self._v

    @property
    def fibers(self) -> int:
        return self._v.size

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, AElem):
            if other.fibers != self.fibers:
                raise FiberCountMismatch(f"{self.fibers} vs {other.fibers} fibers")
            return other._v
        if np.isscalar(other):
            return np.full(self.fibers, other, dtype=complex)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else AElem(self._v + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else AElem(self._v - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else AElem(o - self._v)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else AElem(self._v * o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return AElem(self._v * _checked_reciprocal(o))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return AElem(o * _checked_reciprocal(self._v))

    def __neg__(self):
        return AElem(-self._v)

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)):
            raise TypeError("only integer powers are defined on AElem")
        if k < 0:
            return AElem(_checked_reciprocal(self._v) ** (-k))
        return AElem(self._v ** k)

    def __eq__(self, other):
        if not isinstance(other, AElem):
            return NotImplemented
        return self.fibers == other.fibers and bool(np.all(self._v == other._v))

    def __hash__(self):
        return hash(self._v.tobytes())

    def __repr__(self):
        return f"AElem({self.to_json()})"

    @property
    def star(self) -> "AElem":
        return AElem(np.conj(self._v))

    def conj(self) -> "AElem":
        return self.star

    def norm(self) -> float:
        return float(np.max(np.abs(self._v)))

    def is_self_adjoint(self, tol: float = EPS_SA) -> bool:
        return bool(np.all(np.abs(self._v.imag) <= tol * max(1.0, self.norm())))

    def allclose(self, other, atol: float = 1e-12) -> bool:
        o = self._coerce(other)
        return bool(np.all(np.abs(self._v - o) <= atol))

    def to_json(self) -> list[list[float]]:
        return [[float(z.real), float(z.imag)] for z in self._v]

    @classmethod
    def from_json(cls, data: Sequence[Sequence[float]]) -> "AElem":
        try:
            return cls([complex(re, im) for re, im in data])
        except (TypeError, ValueError) as exc:
            raise ValueError(f"AElem JSON must be a list of [re, im] pairs: {exc}") from None


def _checked_reciprocal(v: np.ndarray) -> np.ndarray:
    mag = np.abs(v)
    scale = max(1.0, float(mag.max()))
    bad = np.flatnonzero(mag <= EPS_INV * scale)
    if bad.size:
        i = int(bad[0])
        raise NotInvertible(i, complex(v[i]))
    return 1.0 / v


def arith(a: AElem, b: AElem, op: str) -> AElem:
    if a.fibers != b.fibers:
        raise FiberCountMismatch(f"{a.fibers} vs {b.fibers} fibers")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


def involution(a: AElem) -> AElem:
    return a.star


def spectrum(a: AElem) -> set[complex]:
    """Distinct fiber values; exact for C(X) with X finite."""
    return {complex(z) for z in a.values}


def is_invertible(a: AElem) -> bool:
    return bool(np.abs(a.values).min() > EPS_INV * max(1.0, a.norm()))


def _require_self_adjoint(a: AElem, tol: float = EPS_SA) -> np.ndarray:
    v = a.values
    scale = max(1.0, a.norm())
    bad = np.abs(v.imag) > tol * scale
    if bad.any():
        i = int(np.argmax(np.abs(v.imag)))
        raise NotSelfAdjoint(i, complex(v[i]))
    return v.real


def sqrt_pos(a: AElem) -> AElem:
    """The unique positive square root of a positive element."""
    re = _require_positive(a)
    return AElem(np.sqrt(re))


def _require_positive(a: AElem) -> np.ndarray:
    v = a.values
    scale = max(1.0, a.norm())
    worst = int(np.argmin(v.real))
    if np.any(np.abs(v.imag) > EPS_SA * scale) or v.real[worst] < -EPS_POS * scale:
        bad = np.abs(v.imag) > EPS_SA * scale
        i = int(np.flatnonzero(bad)[0]) if bad.any() else worst
        raise NotPositive(i, complex(v[i]))
    return np.clip(v.real, 0.0, None)


def abs_parts(a: AElem) -> tuple[AElem, AElem, AElem]:
    """Return (|a|, a+, a-) for self-adjoint a."""
    re = _require_self_adjoint(a)
    # sqrt(a^2) computed as |a| so pos and neg stay exactly nonnegative
    ab = np.abs(re)
    return AElem(ab), AElem(np.maximum(re, 0.0)), AElem(np.maximum(-re, 0.0))


def sign(a: AElem) -> AElem:
    """|a| / a for self-adjoint invertible a; the unique unitary u with a = u |a|."""
    re = _require_self_adjoint(a)
    _checked_reciprocal(re)
    # |a|/a is exactly +-1 per fiber; avoid the rounding of sqrt(a^2)/a
    return AElem(np.sign(re))


def stack(elems: Iterable[AElem]) -> np.ndarray:
    """Stack elements into an array with the fiber axis last."""
    return np.stack([e.values for e in elems], axis=0)
