"""One-step maps and trajectory integration.

Three schemes share one calling convention ``step(problem, t_prev, y, h,
noise)`` with ``y`` of shape ``(P, d)`` (or ``(d,)`` for a single path) and
``noise`` a :class:`~randmil.noise.StepNoise`:

* Euler-Maruyama;
* classical Milstein;
* drift-randomised Milstein, which evaluates the drift at the random
  intermediate time ``theta = t_prev + tau*h`` in a predicted stage state.

Lévy coefficients ``g^{r1,r2}`` are contracted against the iterated
integral with swapped indices, ``sum g^{r1,r2} I_(r2,r1)``.
"""
from __future__ import annotations

import enum

import numpy as np

from .grid import TemporalGrid
from .model import SDEProblem, Trajectory
from .noise import GridNoise, StepNoise, WienerPath, sample_grid_noise
from .rng import RngStream


class SchemeKind(str, enum.Enum):
    EULER_MARUYAMA = "euler_maruyama"
    CLASSICAL_MILSTEIN = "classical_milstein"
    RANDOMIZED_MILSTEIN = "randomized_milstein"

    @property
    def randomized(self) -> bool:
        return self is SchemeKind.RANDOMIZED_MILSTEIN

    @classmethod
    def parse(cls, value) -> "SchemeKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"em": "euler_maruyama", "euler": "euler_maruyama",
                   "milstein": "classical_milstein", "classical": "classical_milstein",
                   "randomized": "randomized_milstein", "randmil": "randomized_milstein"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}") from None


class NonFiniteStateError(ArithmeticError):
    """A trajectory left the finite floating-point range."""

    def __init__(self, step: int, scheme: str = ""):
        self.step = step
        self.scheme = scheme
        super().__init__(f"non-finite state at step {step}" + (f" ({scheme})" if scheme else ""))


def _check_problem(problem: SDEProblem):
    if problem.m > 1 and not problem.commutative:
        raise ValueError(
            "non-commutative noise with m > 1 needs Lévy area simulation, which is not supported"
        )


def _noise_term(G, dw):
    if G.shape[-1] == 1:
        return G[..., 0] * dw
    return np.einsum("...dr,...r->...d", G, dw)


def _levy_term(L, i2):
    # sum_{r1,r2} g^{r1,r2} I_(r2,r1)
    if L.shape[-1] == 1:
        return L[..., 0, 0] * i2[..., 0]
    return np.einsum("...dab,...ba->...d", L, i2)


def _stage(y, tau_h, f0, G, dw_left):
    return y + np.asarray(tau_h)[..., None] * f0 + _noise_term(G, dw_left)


def _randomized_increment(problem, t_prev, y, h, tau, theta, dw_left, dw_full, i2_full):
    f0 = problem.drift(t_prev, y)
    G = problem.diffusion(t_prev, y)
    stage = _stage(y, tau * h, f0, G, dw_left)
    f1 = problem.drift(theta, stage)
    return h * f1 + _noise_term(G, dw_full) + _levy_term(problem.levy(t_prev, y), i2_full)


def _milstein_increment(problem, t_prev, y, h, dw_full, i2_full):
    f0 = problem.drift(t_prev, y)
    G = problem.diffusion(t_prev, y)
    return h * f0 + _noise_term(G, dw_full) + _levy_term(problem.levy(t_prev, y), i2_full)


def _euler_increment(problem, t_prev, y, h, dw_full):
    return h * problem.drift(t_prev, y) + _noise_term(problem.diffusion(t_prev, y), dw_full)


def psi_stage(problem: SDEProblem, t_prev, y, h, noise: StepNoise) -> np.ndarray:
    """Predicted state at the intermediate time,
    ``y + tau*h*f(t_prev, y) + sum_r g^r(t_prev, y) dW^r_left``."""
    y = np.asarray(y, dtype=float)
    return _stage(y, noise.tau * h, problem.drift(t_prev, y), problem.diffusion(t_prev, y), noise.dw_left)


def phi_increment(problem: SDEProblem, t_prev, y, h, noise: StepNoise) -> np.ndarray:
    """Increment of the randomised Milstein step, so that ``X_j = X_{j-1} + phi``."""
    _check_problem(problem)
    y = np.asarray(y, dtype=float)
    return _randomized_increment(problem, t_prev, y, h, noise.tau, noise.theta,
                                 noise.dw_left, noise.dw_full, noise.i2_full)


def randomized_milstein_step(problem: SDEProblem, t_prev, y, h, noise: StepNoise) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y + phi_increment(problem, t_prev, y, h, noise)


def classical_milstein_step(problem: SDEProblem, t_prev, y, h, noise: StepNoise) -> np.ndarray:
    _check_problem(problem)
    y = np.asarray(y, dtype=float)
    return y + _milstein_increment(problem, t_prev, y, h, noise.dw_full, noise.i2_full)


def euler_step(problem: SDEProblem, t_prev, y, h, noise: StepNoise) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y + _euler_increment(problem, t_prev, y, h, noise.dw_full)


STEPS = {
    SchemeKind.EULER_MARUYAMA: euler_step,
    SchemeKind.CLASSICAL_MILSTEIN: classical_milstein_step,
    SchemeKind.RANDOMIZED_MILSTEIN: randomized_milstein_step,
}


def integrate(problem: SDEProblem, grid: TemporalGrid, kind, path: WienerPath = None,
              stream: RngStream = None, *, noise: GridNoise = None) -> Trajectory:
    """Run a scheme over every step of ``grid`` for all paths of ``path``.

    The randomised scheme draws ``tau_j`` from ``stream`` (counter ``j``)
    and inserts ``W(theta_j)`` into ``path``; the other schemes only query
    the grid points. Pass precomputed ``noise`` instead of ``path`` to
    replay a run. The returned trajectory keeps the noise it used.

    Raises :class:`NonFiniteStateError` naming the first step whose state
    is not finite.
    """
    kind = SchemeKind.parse(kind)
    _check_problem(problem)
    if grid.T != problem.T:
        raise ValueError(f"grid ends at {grid.T!r} but the problem horizon is {problem.T!r}")
    if noise is None:
        if path is None:
            raise ValueError("integrate needs a WienerPath or precomputed noise")
        if path.m != problem.m:
            raise ValueError(f"path has m={path.m}, problem needs m={problem.m}")
        if kind.randomized and stream is None:
            raise ValueError("the randomized scheme needs a tau stream")
        noise = sample_grid_noise(path, grid, stream if kind.randomized else None)
    elif noise.grid != grid:
        raise ValueError("noise was sampled on a different grid")
    elif kind.randomized and not noise.randomized:
        raise ValueError("the randomized scheme needs noise with intermediate points")

    t, hs = grid.times.tolist(), grid.steps.tolist()
    P = noise.dw_full.shape[1]
    states = np.empty((grid.n_steps + 1, P, problem.d))
    y = np.broadcast_to(problem.initial_state, (P, problem.d)).copy()
    states[0] = y
    tau, theta, dwl, dwf, i2f = noise.tau, noise.theta, noise.dw_left, noise.dw_full, noise.i2_full
    # Blow-ups propagate as inf/nan; the first offending step is located afterwards.
    with np.errstate(all="ignore"):
        if kind is SchemeKind.RANDOMIZED_MILSTEIN:
            for j in range(grid.n_steps):
                y = y + _randomized_increment(problem, t[j], y, hs[j], tau[j], theta[j], dwl[j], dwf[j], i2f[j])
                states[j + 1] = y
        elif kind is SchemeKind.CLASSICAL_MILSTEIN:
            for j in range(grid.n_steps):
                y = y + _milstein_increment(problem, t[j], y, hs[j], dwf[j], i2f[j])
                states[j + 1] = y
        else:
            for j in range(grid.n_steps):
                y = y + _euler_increment(problem, t[j], y, hs[j], dwf[j])
                states[j + 1] = y
    finite = np.isfinite(states).all(axis=(1, 2))
    if not finite.all():
        raise NonFiniteStateError(int(np.argmin(finite)), kind.value)
    return Trajectory(grid, np.moveaxis(states, 0, 1), noise)
