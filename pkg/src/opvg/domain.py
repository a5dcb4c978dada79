"""Box-shaped chart domains."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np


@dataclass(frozen=True)
class BoxDomain:
    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        iv = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", iv)
        for i, (a, b) in enumerate(iv):
            if not a < b:
                raise ValueError(f"interval {i} is empty or reversed: [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.intervals])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.intervals])

    def contains(self, p, tol: float = 1e-12) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def grid(self, per_axis: int = 3) -> np.ndarray:
        """Interior tensor grid at fractions (2j+1)/(2*per_axis) along each axis."""
        fr = (2 * np.arange(per_axis) + 1) / (2 * per_axis)
        axes = [a + fr * (b - a) for a, b in self.intervals]
        return np.array(list(product(*axes)), dtype=float)

    def sample(self, rng: np.random.Generator, count: int, margin: float = 0.05) -> np.ndarray:
        """Random interior points keeping a relative margin from the boundary."""
        lo, hi = self.lower, self.upper
        span = hi - lo
        u = rng.uniform(margin, 1 - margin, size=(count, self.dim))
        return lo + u * span
