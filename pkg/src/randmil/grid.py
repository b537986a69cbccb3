"""Temporal grids on [0, T]."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class TemporalGrid:
    """Strictly increasing partition ``0 = t_0 < t_1 < ... < t_N = T``.

    Grids may be non-equidistant. Instances are immutable; the ``times``
    array is stored read-only.
    """

    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a grid needs at least two time points")
        if t[0] != 0.0:
            raise ValueError(f"grid must start at 0, got {t[0]!r}")
        if not np.all(np.diff(t) > 0):
            raise ValueError("grid times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def steps(self) -> np.ndarray:
        """Step sizes ``h_j = t_j - t_{j-1}``, j = 1..N."""
        return np.diff(self.times)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, TemporalGrid):
            return NotImplemented
        return np.array_equal(self.times, other.times)

    def __hash__(self):
        return hash(self.times.tobytes())

    def __repr__(self):
        return f"TemporalGrid(N={self.n_steps}, T={self.T!r}, max_step={max_step(self)!r})"


def uniform_grid(T: float, N: int) -> TemporalGrid:
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    # i*T/N rather than linspace so dyadic grids are exact for dyadic T.
    times = np.arange(N + 1) * (T / N)
    times[-1] = T
    return TemporalGrid(times)


def dyadic_refine(grid: TemporalGrid, k: int) -> TemporalGrid:
    """Split every step of ``grid`` into ``2**k`` equal substeps.

    Implemented as ``k`` rounds of bisection, each midpoint computed from its
    two parent endpoints. Original points are kept bit-exactly and
    ``dyadic_refine(g, a + b) == dyadic_refine(dyadic_refine(g, a), b)``.
    """
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    t = grid.times
    for _ in range(int(k)):
        mid = t[:-1] + 0.5 * (t[1:] - t[:-1])
        out = np.empty(2 * t.size - 1)
        out[0::2] = t
        out[1::2] = mid
        t = out
    return grid if k == 0 else TemporalGrid(t)


def max_step(grid: TemporalGrid) -> float:
    """The maximum step size ``|h|``."""
    return float(np.max(grid.steps))


def dyadic_grid(T: float, n: int) -> TemporalGrid:
    """Uniform grid with step ``2**-n * T``."""
    return uniform_grid(T, 2**n)
