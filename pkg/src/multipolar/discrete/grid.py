"""Uniform one-dimensional grids and piecewise-linear grid functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import DomainError, ValidationError
from ..special import ProblemParams

__all__ = ["Grid1D", "GridFunction", "POLE_CLEARANCE"]

# Poles must sit at least this fraction of a step away from every node.
POLE_CLEARANCE = 0.25


@dataclass(frozen=True)
class Grid1D:
    """Nodes x_i = -L + offset + i*h in [-L, L).

    A grid function is the piecewise-linear interpolant of its nodal values
    and vanishes at the virtual nodes one step beyond either end, so its
    support is [x_0 - h, x_{n-1} + h].
    """

    L: float
    h: float
    offset: float | None = None
    params: ProblemParams = field(default_factory=lambda: ProblemParams(1, 0.25))

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValidationError(f"extent L must be positive, got {self.L}")
        if not (0 < self.h < self.L):
            raise ValidationError(f"spacing h must lie in (0, L), got {self.h}")
        offset = 0.5 * self.h if self.offset is None else float(self.offset)
        if not (0.0 <= offset < self.h):
            raise ValidationError(f"offset must lie in [0, h), got {offset}")
        if self.params.N != 1 or not self.params.s < 0.5:
            raise ValidationError("the grid solver needs N = 1 and s < 1/2")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "offset", offset)

    @property
    def n(self) -> int:
        # Count i >= 0 with -L + offset + i*h < L.
        return int(math.ceil((2 * self.L - self.offset) / self.h - 1e-9))

    @property
    def nodes(self) -> np.ndarray:
        return -self.L + self.offset + self.h * np.arange(self.n)

    @property
    def s(self) -> float:
        return self.params.s

    def check_pole(self, pole: float) -> float:
        """Return ``pole`` as a float after checking the off-grid clearance."""
        a = float(pole)
        if not (-self.L < a < self.L):
            raise DomainError(f"pole {a} lies outside (-L, L)")
        t = (a + self.L - self.offset) / self.h
        gap = abs(t - round(t)) * self.h
        if gap < POLE_CLEARANCE * self.h * (1 - 1e-9):
            raise DomainError(f"pole {a} is within {gap:.3g} of a grid node (need >= h/4)")
        return a

    def index_shift(self, m: int) -> float:
        """Distance moved by shifting nodal values by ``m`` places."""
        return m * self.h


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValidationError(f"expected {self.grid.n} nodal values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid1D, fun: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(grid, np.asarray(fun(grid.nodes), dtype=float))

    @classmethod
    def zeros(cls, grid: Grid1D) -> "GridFunction":
        return cls(grid, np.zeros(grid.n))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, c * self.values)

    def shifted(self, m: int) -> "GridFunction":
        """Move the function by m*h; values pushed past either end must already be zero."""
        v = self.values
        out = np.zeros_like(v)
        if m >= 0:
            lost = v[v.size - m :] if m else v[:0]
            out[m:] = v[: v.size - m]
        else:
            lost = v[: -m]
            out[:m] = v[-m:]
        if np.any(lost != 0):
            raise ValidationError("shift would push nonzero values off the grid")
        return GridFunction(self.grid, out)

    def boundary_magnitude(self) -> float:
        """Largest |u| at the two end nodes relative to max |u|."""
        top = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if top == 0:
            return 0.0
        return max(abs(self.values[0]), abs(self.values[-1])) / top

    def table(self) -> np.ndarray:
        return np.column_stack([self.grid.nodes, self.values])

