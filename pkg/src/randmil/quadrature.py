"""Randomised Riemann sums and their convergence-rate study."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import ErrorEntry, ErrorReport, lp_estimate
from .grid import TemporalGrid, dyadic_grid
from .model import weierstrass, weierstrass_integral
from .rng import RngStream


def _terms(y, grid: TemporalGrid, points) -> np.ndarray:
    vals = np.asarray(y(points), dtype=float)
    h = grid.steps
    if vals.shape == points.shape:
        return h * vals
    if vals.shape[:-1] == points.shape:
        return h[:, None] * vals
    raise ValueError(f"integrand returned shape {vals.shape} for points of shape {points.shape}")


def randomized_riemann(y, grid: TemporalGrid, taus) -> np.ndarray:
    """Partial sums ``Q^n = sum_{j<=n} h_j y(t_{j-1} + tau_j h_j)``, n = 1..N.

    ``taus`` has shape ``(..., N)``; several ensembles can be evaluated at
    once. ``y`` maps an array of times to values of the same shape (scalar
    integrand) or with a trailing dimension ``d``. The sum over ``j`` runs
    sequentially, left to right.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.shape[-1:] != (grid.n_steps,):
        raise ValueError(f"need {grid.n_steps} tau values per ensemble, got shape {taus.shape}")
    if np.any((taus < 0) | (taus > 1)):
        raise ValueError("tau values must lie in [0, 1]")
    t = grid.times
    points = t[:-1] + taus * grid.steps
    terms = _terms(y, grid, points)
    axis = taus.ndim - 1
    return np.cumsum(terms, axis=axis)


def left_riemann(y, grid: TemporalGrid) -> np.ndarray:
    """Partial sums of the left-endpoint rule, n = 1..N."""
    return np.cumsum(_terms(y, grid, grid.times[:-1]), axis=0)


@dataclass(frozen=True)
class HolderIntegrand:
    """``|t - c|^gamma``: Hölder continuous of order ``gamma``, no better at ``c``."""

    gamma: float
    c: float = 1 / 3

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")

    def __call__(self, t):
        return np.abs(np.asarray(t, dtype=float) - self.c) ** self.gamma

    def integral(self, t):
        """Closed-form integral over ``[0, t]``."""
        g1 = self.gamma + 1
        s = np.asarray(t, dtype=float) - self.c
        return (np.sign(s) * np.abs(s) ** g1 + self.c**g1) / g1

    @property
    def name(self):
        return f"holder(gamma={self.gamma!r}, c={self.c!r})"


@dataclass(frozen=True)
class WeierstrassIntegrand:
    """Truncated Weierstrass function: Hölder-``gamma`` at every point."""

    gamma: float
    base: int = 2
    terms: int = 20

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")

    def __call__(self, t):
        return weierstrass(t, self.gamma, self.base, self.terms)

    def integral(self, t):
        return weierstrass_integral(t, self.gamma, self.base, self.terms)

    @property
    def name(self):
        return f"weierstrass(gamma={self.gamma!r}, base={self.base!r}, terms={self.terms!r})"


@dataclass(frozen=True)
class PolynomialIntegrand:
    """``sum_k coeffs[k] t^k``."""

    coeffs: tuple

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return sum(a * t**k for k, a in enumerate(self.coeffs)) + 0.0 * t

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        return sum(a * t ** (k + 1) / (k + 1) for k, a in enumerate(self.coeffs)) + 0.0 * t

    @property
    def name(self):
        return f"polynomial{tuple(self.coeffs)}"


def build_integrand(name: str, **params):
    if name == "holder":
        return HolderIntegrand(**params)
    if name == "weierstrass":
        return WeierstrassIntegrand(**params)
    if name == "linear":
        return PolynomialIntegrand((params.get("a", 0.0), params.get("b", 1.0)))
    if name == "polynomial":
        return PolynomialIntegrand(tuple(params["coeffs"]))
    raise ValueError(f"unknown integrand {name!r}; choose from holder, weierstrass, linear, polynomial")


def quadrature_rate_study(integrand, levels, reps: int = 1000, p: float = 2.0,
                          stream=0, T: float = 1.0, baseline: bool = True) -> ErrorReport:
    """L^p error of ``max_n |Q^n - int_0^{t_n} y|`` on dyadic grids ``2**-n * T``.

    ``integrand`` needs ``__call__`` and a closed-form ``integral``.
    ``stream`` is an :class:`RngStream` over ``reps`` ensembles or an
    integer seed. With ``baseline`` the deterministic left-endpoint rule is
    reported as well (standard error 0).
    """
    if not p >= 2:
        raise ValueError(f"p must be at least 2, got {p!r}")
    if reps < 100:
        raise ValueError(f"need at least 100 repetitions, got {reps}")
    if not isinstance(stream, RngStream):
        stream = RngStream(int(stream), reps, "quadrature")
    if stream.n_paths != reps:
        raise ValueError("stream must cover exactly `reps` ensembles")
    entries = []
    for n in levels:
        grid = dyadic_grid(T, n)
        exact = integrand.integral(grid.times[1:])
        taus = stream.child(f"{stream.purpose}/n={n}").uniform(np.arange(grid.n_steps))
        q = randomized_riemann(integrand, grid, taus)
        worst = np.max(np.abs(q - exact), axis=-1)
        err, se = lp_estimate(worst, p)
        entries.append(ErrorEntry("randomized_riemann", n, 2.0**-n * T, reps, p, err, se))
        if baseline:
            worst = float(np.max(np.abs(left_riemann(integrand, grid) - exact)))
            entries.append(ErrorEntry("left_riemann", n, 2.0**-n * T, 1, p, worst, 0.0))
    return ErrorReport(entries, meta={"integrand": integrand.name, "reference": "closed-form antiderivative",
                                       "reps": reps})
