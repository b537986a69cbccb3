"""Monte Carlo error norms, residuals, the stochastic Spijker norm and EOC fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import TemporalGrid
from .model import SDEProblem
from .noise import GridNoise
from .scheme import _randomized_increment


@dataclass(frozen=True)
class ErrorEntry:
    scheme: str
    n: int
    h: float
    samples: int
    p: float
    error: float
    standard_error: float
    cpu_seconds: float = 0.0


@dataclass
class ErrorReport:
    """Errors per (scheme, step size) with least-squares order fits.

    ``meta`` records how the numbers were produced (reference type, seed,
    problem); it is informational and not serialised to CSV.
    """

    entries: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = list(self.entries)
        seen = set()
        for e in self.entries:
            if not e.h > 0:
                raise ValueError(f"step size must be positive: {e}")
            if not e.error >= 0 and not math.isnan(e.error):
                raise ValueError(f"error must be nonnegative: {e}")
            if e.samples < 1:
                raise ValueError(f"samples must be at least 1: {e}")
            if (e.scheme, e.h) in seen:
                raise ValueError(f"duplicate step size {e.h!r} for {e.scheme}")
            seen.add((e.scheme, e.h))

    def __len__(self):
        return len(self.entries)

    @property
    def schemes(self) -> list:
        return sorted({e.scheme for e in self.entries})

    def for_scheme(self, scheme: str) -> list:
        """Entries of one scheme, finest step last."""
        return sorted((e for e in self.entries if e.scheme == scheme), key=lambda e: -e.h)

    def fit(self, scheme: str) -> tuple:
        """``(slope, intercept)`` of log(error) on log(h); NaNs if not fittable."""
        rows = [e for e in self.for_scheme(scheme) if e.error > 0]
        if len(rows) < 2:
            return math.nan, math.nan
        return eoc_regression([e.h for e in rows], [e.error for e in rows])

    @property
    def fits(self) -> dict:
        return {s: self.fit(s) for s in self.schemes}

    @property
    def slope(self) -> float:
        if len(self.schemes) != 1:
            raise ValueError("slope is ambiguous for a report with several schemes; use fit()")
        return self.fit(self.schemes[0])[0]

    @property
    def slope_intercept(self) -> float:
        if len(self.schemes) != 1:
            raise ValueError("intercept is ambiguous for a report with several schemes; use fit()")
        return self.fit(self.schemes[0])[1]

    def error(self, scheme: str, n: int) -> ErrorEntry:
        for e in self.entries:
            if e.scheme == scheme and e.n == n:
                return e
        raise KeyError((scheme, n))


def _check_p(p):
    if not p >= 2:
        raise ValueError(f"p must be at least 2, got {p!r}")


def lp_estimate(values, p=2.0) -> tuple:
    """Monte Carlo ``(E|V|^p)^(1/p)`` with a delta-method standard error.

    ``values`` holds one nonnegative sample per path.
    """
    _check_p(p)
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    if v.size == 0:
        raise ValueError("no samples")
    scale = float(v.max())
    if scale == 0.0:
        return 0.0, 0.0
    if not math.isfinite(scale):
        return math.inf, math.nan
    # Normalising first keeps v**p clear of under- and overflow.
    vp = (v / scale) ** p
    moment = float(np.mean(vp))
    se_moment = float(np.std(vp, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    est = moment ** (1.0 / p)
    return scale * est, scale * est / (p * moment) * se_moment


def _pointwise_norm(a: np.ndarray, vector_ndim: int) -> np.ndarray:
    return np.linalg.norm(a, axis=-1) if a.ndim == vector_ndim else np.abs(a)


def lp_max_error(diff_samples, p=2.0) -> tuple:
    """``|| max_n |diff^n| ||_{L^p}`` over paths.

    ``diff_samples`` has shape ``(M, N+1)`` for scalar or ``(M, N+1, d)``
    for vector-valued differences.
    """
    a = np.asarray(diff_samples, dtype=float)
    if a.ndim not in (2, 3) or a.shape[0] == 0:
        raise ValueError(f"expected (M, N+1) or (M, N+1, d) samples, got shape {a.shape}")
    return lp_estimate(_pointwise_norm(a, 3).max(axis=1), p)


def terminal_lp_error(diff_at_T, p=2.0) -> tuple:
    """``|| |diff(T)| ||_{L^p}`` from shape ``(M,)`` or ``(M, d)`` samples."""
    a = np.asarray(diff_at_T, dtype=float)
    if a.ndim not in (1, 2) or a.shape[0] == 0:
        raise ValueError(f"expected (M,) or (M, d) samples, got shape {a.shape}")
    return lp_estimate(_pointwise_norm(a, 2), p)


def residual(problem: SDEProblem, grid: TemporalGrid, y, noise: GridNoise,
             x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Residual of a grid function under the randomised Milstein recursion.

    ``R^0 = Y^0 - X^0`` and ``R^j = Y^j - (Y^{j-1} + Phi_j(Y^{j-1}, tau_j))``
    with the increment driven by ``noise``. ``y`` has shape ``(P, N+1, d)``.
    The step is re-evaluated exactly as in the integrator, so the scheme's
    own trajectory has residual identically zero.
    """
    y = np.asarray(y, dtype=float)
    if noise.grid != grid:
        raise ValueError("noise was sampled on a different grid")
    if not noise.randomized:
        raise ValueError("the residual needs randomised noise")
    P, N1, d = y.shape
    if N1 != len(grid) or P != noise.dw_full.shape[1]:
        raise ValueError(f"grid function shape {y.shape} does not match grid/noise")
    x0 = problem.initial_state if x0 is None else np.asarray(x0, dtype=float)
    ys = np.ascontiguousarray(np.moveaxis(y, 1, 0))
    out = np.empty_like(ys)
    out[0] = ys[0] - x0
    t, hs = grid.times.tolist(), grid.steps.tolist()
    for j in range(grid.n_steps):
        prev = ys[j]
        step = prev + _randomized_increment(problem, t[j], prev, hs[j], noise.tau[j], noise.theta[j],
                                            noise.dw_left[j], noise.dw_full[j], noise.i2_full[j])
        out[j + 1] = ys[j + 1] - step
    return np.moveaxis(out, 0, 1)


def spijker_parts(residual_samples) -> tuple:
    """Per-path ``|Z^0|`` and ``max_n |sum_{j<=n} Z^j|``."""
    z = np.asarray(residual_samples, dtype=float)
    if z.ndim not in (2, 3) or z.shape[0] == 0 or z.shape[1] < 2:
        raise ValueError(f"expected (M, N+1) or (M, N+1, d) residuals, got shape {z.shape}")
    head = _pointwise_norm(z[:, 0], 2)
    partial = np.cumsum(z[:, 1:], axis=1)
    return head, _pointwise_norm(partial, 3).max(axis=1)


def spijker_norm(residual_samples, p=2.0) -> tuple:
    """Stochastic Spijker norm ``||Z^0||_p + || max_n |sum_{j<=n} Z^j| ||_p``.

    The standard error is the sum of the two terms' standard errors, a
    bound that ignores their correlation.
    """
    head, tail = spijker_parts(residual_samples)
    a, sa = lp_estimate(head, p)
    b, sb = lp_estimate(tail, p)
    return a + b, sa + sb


def eoc_regression(hs, errors) -> tuple:
    """Least-squares fit ``log(error) = slope * log(h) + intercept``."""
    h = np.asarray(hs, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape or h.ndim != 1 or h.size < 2:
        raise ValueError("need two equal-length sequences of at least two values")
    if np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("step sizes and errors must be positive")
    slope, intercept = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope), float(intercept)
