"""SDE problem definitions and closed-form oracles.

Coefficient functions are vectorised over a leading batch of states:

* ``drift(t, x)`` maps ``x`` of shape ``(..., d)`` to ``(..., d)``;
* ``diffusion(t, x)`` returns ``(..., d, m)``, column ``r`` being ``g^r``;
* ``levy(t, x)`` returns ``(..., d, m, m)`` with
  ``levy(t, x)[..., :, r1, r2] = (dg^{r1}/dx)(t, x) @ g^{r2}(t, x)``.

``t`` is a scalar or an array broadcastable against ``x.shape[:-1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import TemporalGrid

Coefficient = Callable[[np.ndarray, np.ndarray], np.ndarray]

FD_REL_STEP = 1e-5


def _tcol(t):
    """Time as a column broadcastable against ``(..., d)`` states."""
    return np.asarray(t, dtype=float)[..., None]


@dataclass(frozen=True, eq=False)
class SDEProblem:
    """``dX = f(t, X) dt + sum_r g^r(t, X) dW^r``, ``X(0) = initial_state`` on [0, T].

    ``gamma`` is the declared Hölder exponent of the drift in time; it is
    metadata used for expected rates only. ``exact``, when present, maps
    ``(t, W(t))`` with shapes ``(...)`` and ``(..., m)`` to the exact
    solution ``(..., d)`` driven by that Brownian value.
    """

    d: int
    m: int
    drift: Coefficient
    diffusion: Coefficient
    levy: Coefficient
    initial_state: np.ndarray
    T: float = 1.0
    gamma: float = 1.0
    commutative: bool = True
    name: str = "custom"
    exact: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.initial_state, dtype=float)).copy()
        x0.setflags(write=False)
        object.__setattr__(self, "initial_state", x0)
        if x0.shape != (self.d,):
            raise ValueError(f"initial_state has shape {x0.shape}, expected ({self.d},)")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        expected = {
            "drift": (self.d,),
            "diffusion": (self.d, self.m),
            "levy": (self.d, self.m, self.m),
        }
        for attr, shape in expected.items():
            out = np.asarray(getattr(self, attr)(0.0, x0))
            if out.shape != shape:
                raise ValueError(f"{attr} returned shape {out.shape}, expected {shape}")
            if not np.all(np.isfinite(out)):
                raise ValueError(f"{attr} is not finite at (0, initial_state)")

    @property
    def has_oracle(self) -> bool:
        return self.exact is not None

    def exact_on_grid(self, grid: TemporalGrid, w: np.ndarray) -> np.ndarray:
        """Exact solution at the grid points given ``W`` there, shape ``(P, N+1, m)``."""
        if self.exact is None:
            raise ValueError(f"problem {self.name!r} has no closed-form solution")
        return self.exact(np.broadcast_to(grid.times, w.shape[:-1]), w)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Grid function ``(X_h^n)_{n=0..N}`` for a batch of paths.

    ``states`` has shape ``(P, N+1, d)``; ``noise`` is the
    :class:`~randmil.noise.GridNoise` that produced it, when known.
    """

    grid: TemporalGrid
    states: np.ndarray
    noise: Optional[object] = None

    @property
    def terminal(self) -> np.ndarray:
        return self.states[:, -1]


def finite_difference_levy(diffusion: Coefficient) -> Coefficient:
    """Lévy coefficients ``(dg^{r1}/dx) g^{r2}`` by centred differences.

    The step for component ``k`` is ``1e-5 * max(1, |x_k|)``.
    """

    def levy(t, x):
        x = np.asarray(x, dtype=float)
        g = np.asarray(diffusion(t, x))
        d = x.shape[-1]
        jac = np.empty(g.shape + (d,))
        for k in range(d):
            step = FD_REL_STEP * np.maximum(1.0, np.abs(x[..., k]))
            xp = x.copy()
            xm = x.copy()
            xp[..., k] += step
            xm[..., k] -= step
            width = (xp[..., k] - xm[..., k])[..., None, None]
            jac[..., k] = (np.asarray(diffusion(t, xp)) - np.asarray(diffusion(t, xm))) / width
        # jac[..., i, r1, k] = d g^{r1}_i / d x_k
        return np.einsum("...irk,...ks->...irs", jac, g)

    return levy


def custom_problem(drift, diffusion, initial_state, *, m=1, levy=None, T=1.0,
                   gamma=1.0, commutative=True, name="custom", exact=None) -> SDEProblem:
    """Build a problem, falling back to finite-difference Lévy coefficients."""
    x0 = np.atleast_1d(np.asarray(initial_state, dtype=float))
    return SDEProblem(
        d=x0.size, m=m, drift=drift, diffusion=diffusion,
        levy=levy if levy is not None else finite_difference_levy(diffusion),
        initial_state=x0, T=T, gamma=gamma, commutative=commutative,
        name=name, exact=exact,
    )


def paper_example_problem(mu=-0.01, w1=2**6 * np.pi, w2=1.0, x0=1.1, T=1.0) -> SDEProblem:
    """``dX = (mu|X| + |sin(w1 t)|) dt + |cos(w2 t)| X dW``."""

    def drift(t, x):
        return mu * np.abs(x) + np.abs(np.sin(w1 * _tcol(t)))

    def diffusion(t, x):
        return (np.abs(np.cos(w2 * _tcol(t))) * x)[..., None]

    def levy(t, x):
        return (np.cos(w2 * _tcol(t)) ** 2 * x)[..., None, None]

    return SDEProblem(
        d=1, m=1, drift=drift, diffusion=diffusion, levy=levy,
        initial_state=[x0], T=T, gamma=1.0, commutative=True, name="paper_example",
        params=dict(mu=mu, w1=w1, w2=w2, x0=x0, T=T),
    )


def gbm_exact(x0, a, b, t, w_t):
    """Pathwise geometric Brownian motion ``x0 exp((a - b^2/2) t + b W(t))``."""
    return x0 * np.exp((a - 0.5 * b * b) * t + b * w_t)


def gbm_problem(a=0.05, b=0.2, x0=1.0, T=1.0) -> SDEProblem:
    """``dX = a X dt + b X dW`` with its closed-form solution attached."""

    def drift(t, x):
        return a * x

    def diffusion(t, x):
        return (b * x)[..., None]

    def levy(t, x):
        return (b * b * x)[..., None, None]

    def exact(t, w):
        return gbm_exact(x0, a, b, np.asarray(t)[..., None], w)

    return SDEProblem(
        d=1, m=1, drift=drift, diffusion=diffusion, levy=levy,
        initial_state=[x0], T=T, gamma=1.0, commutative=True, name="gbm",
        exact=exact, params=dict(a=a, b=b, x0=x0, T=T),
    )


def linear_multinoise_problem(a=0.05, b=(0.2, 0.1), x0=1.0, T=1.0) -> SDEProblem:
    """Scalar ``dX = a X dt + sum_r b_r X dW^r``; commutative with m = len(b).

    Here ``g^{r1,r2} = b_{r1} b_{r2} X`` so off-diagonal Lévy coefficients
    differ from the diagonal ones.
    """
    b = np.asarray(b, dtype=float)
    m = b.size

    def drift(t, x):
        return a * x

    def diffusion(t, x):
        return x[..., :, None] * b

    def levy(t, x):
        return x[..., :, None, None] * np.outer(b, b)

    def exact(t, w):
        t = np.asarray(t)[..., None]
        return x0 * np.exp((a - 0.5 * np.dot(b, b)) * t + (w @ b)[..., None])

    return SDEProblem(
        d=1, m=m, drift=drift, diffusion=diffusion, levy=levy,
        initial_state=[x0], T=T, gamma=1.0, commutative=True, name="linear_multinoise",
        exact=exact, params=dict(a=a, b=tuple(b.tolist()), x0=x0, T=T),
    )


def holder_ode_exact(t, gamma, c, x0):
    """Solution of ``x' = |t - c|^gamma``, ``x(0) = x0``."""
    t = np.asarray(t, dtype=float)
    s = t - c
    return x0 + (c ** (gamma + 1) + np.sign(s) * np.abs(s) ** (gamma + 1)) / (gamma + 1)


def holder_ode_problem(gamma=0.25, c=1 / 3, x0=0.0, T=1.0) -> SDEProblem:
    """Deterministic ``dX = |t - c|^gamma dt`` (g = 0), drift Hölder-``gamma`` in t."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
    if not 0 < c < T:
        raise ValueError(f"c must lie in (0, T), got {c!r}")

    def drift(t, x):
        return np.broadcast_to(np.abs(_tcol(t) - c) ** gamma, np.broadcast_shapes(np.shape(x), np.shape(_tcol(t))))

    def diffusion(t, x):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(_tcol(t))) + (1,))

    def levy(t, x):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(_tcol(t))) + (1, 1))

    def exact(t, w):
        return holder_ode_exact(np.asarray(t)[..., None], gamma, c, x0)

    return SDEProblem(
        d=1, m=1, drift=drift, diffusion=diffusion, levy=levy,
        initial_state=[x0], T=T, gamma=gamma, commutative=True, name="holder_ode",
        exact=exact, params=dict(gamma=gamma, c=c, x0=x0, T=T),
    )


def weierstrass(t, gamma, base=2, terms=20):
    """Truncated Weierstrass function ``sum_k base^(-k gamma) cos(base^k pi t)``.

    Hölder-``gamma`` uniformly down to scales ``~ base^-terms``, i.e. rough
    everywhere rather than at a single point.
    """
    k = np.arange(terms + 1)
    t = np.asarray(t, dtype=float)[..., None]
    return np.sum(base ** (-k * gamma) * np.cos(base**k * np.pi * t), axis=-1)


def weierstrass_integral(t, gamma, base=2, terms=20):
    """Closed-form ``int_0^t`` of :func:`weierstrass`."""
    k = np.arange(terms + 1)
    t = np.asarray(t, dtype=float)[..., None]
    freq = base**k * np.pi
    return np.sum(base ** (-k * gamma) * np.sin(freq * t) / freq, axis=-1)


def weierstrass_ode_problem(gamma=0.25, base=2, terms=20, x0=0.0, T=1.0) -> SDEProblem:
    """Deterministic ``dX = W_gamma(t) dt`` with an everywhere-rough Weierstrass drift."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")

    def drift(t, x):
        return np.broadcast_to(weierstrass(_tcol(t), gamma, base, terms),
                               np.broadcast_shapes(np.shape(x), np.shape(_tcol(t))))

    def diffusion(t, x):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(_tcol(t))) + (1,))

    def levy(t, x):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(_tcol(t))) + (1, 1))

    def exact(t, w):
        return x0 + weierstrass_integral(np.asarray(t)[..., None], gamma, base, terms)

    return SDEProblem(
        d=1, m=1, drift=drift, diffusion=diffusion, levy=levy,
        initial_state=[x0], T=T, gamma=gamma, commutative=True, name="weierstrass_ode",
        exact=exact, params=dict(gamma=gamma, base=base, terms=terms, x0=x0, T=T),
    )


def zero_problem(x0=1.0, T=1.0, m=1) -> SDEProblem:
    """All coefficients vanish; the solution is constant."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.size

    def drift(t, x):
        return np.zeros_like(x)

    def diffusion(t, x):
        return np.zeros(np.shape(x) + (m,))

    def levy(t, x):
        return np.zeros(np.shape(x) + (m, m))

    def exact(t, w):
        return np.broadcast_to(x0, np.shape(t) + (d,))

    return SDEProblem(
        d=d, m=m, drift=drift, diffusion=diffusion, levy=levy,
        initial_state=x0, T=T, gamma=1.0, commutative=True, name="zero",
        exact=exact, params=dict(x0=float(x0[0]) if d == 1 else x0.tolist(), T=T, m=m),
    )


PROBLEMS = {
    "gbm": gbm_problem,
    "paper_example": paper_example_problem,
    "holder_ode": holder_ode_problem,
    "weierstrass_ode": weierstrass_ode_problem,
    "linear_multinoise": linear_multinoise_problem,
    "zero": zero_problem,
}


def build_problem(name: str, params: Optional[dict] = None) -> SDEProblem:
    """Look up a problem factory by name and apply keyword parameters."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**(params or {}))
