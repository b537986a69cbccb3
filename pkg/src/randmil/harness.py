"""Coupled multi-grid Monte Carlo studies.

Paths are simulated in fixed-size chunks. Each chunk owns one batched
:class:`~randmil.noise.WienerPath`; the reference solution and every
(scheme, step size) run of the chunk are driven by it, while ``tau`` draws
come from substreams tagged by scheme and level. Per-path results are
merged in path order, so reports do not depend on the number of workers.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .diagnostics import ErrorEntry, ErrorReport, lp_estimate, residual, spijker_parts
from .grid import dyadic_grid
from .model import build_problem
from .noise import WienerPath, sample_grid_noise
from .rng import RngStream
from .scheme import SchemeKind, integrate

ALL_SCHEMES = tuple(k.value for k in SchemeKind)
_EXACT = {"exact", "oracle", "exact-oracle"}
_NUMERICAL = {"numerical", "randomized-milstein", "randomized_milstein"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a study's numbers.

    ``reference`` is ``"exact"`` (closed-form oracle on the same path) or
    ``"numerical"`` (randomised Milstein with step ``2**-n_ref * T``).
    ``metric`` selects the terminal-time error or the maximum over the grid.
    Brownian paths are first sampled on the ``2**-n_ref * T`` grid whichever
    reference is used, so switching the reference keeps the realisation.
    ``chunk_size`` fixes how paths are batched; it changes floating-point
    round-off, ``workers`` does not.
    """

    problem: str = "gbm"
    problem_params: dict = field(default_factory=dict)
    schemes: tuple = ALL_SCHEMES
    n_min: int = 4
    n_max: int = 10
    samples: int = 1000
    p: float = 2.0
    seed: int = 0
    reference: str = "exact"
    n_ref: int = 15
    workers: int = 1
    chunk_size: int = 125
    metric: str = "terminal"
    timing_repeats: int = 5

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(SchemeKind.parse(s).value for s in self.schemes))
        object.__setattr__(self, "problem_params", dict(self.problem_params))
        ref = str(self.reference).lower()
        if ref in _EXACT:
            ref = "exact"
        elif ref in _NUMERICAL:
            ref = "numerical"
        else:
            raise ValueError(f"reference must be 'exact' or 'numerical', got {self.reference!r}")
        object.__setattr__(self, "reference", ref)
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        if not 0 <= self.n_min <= self.n_max:
            raise ValueError(f"need 0 <= n_min <= n_max, got {self.n_min}..{self.n_max}")
        if ref == "numerical" and not self.n_ref > self.n_max:
            raise ValueError(f"n_ref ({self.n_ref}) must exceed n_max ({self.n_max})")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if not self.p >= 2:
            raise ValueError(f"p must be at least 2, got {self.p!r}")
        if self.workers < 1 or self.chunk_size < 1 or self.timing_repeats < 1:
            raise ValueError("workers, chunk_size and timing_repeats must be positive")
        if self.metric not in ("terminal", "max"):
            raise ValueError(f"metric must be 'terminal' or 'max', got {self.metric!r}")

    @property
    def levels(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def build_problem(self):
        return build_problem(self.problem, self.problem_params)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


def default_workers() -> int:
    return int(os.environ.get("RANDMIL_WORKERS", "1"))


def _chunks(config: ExperimentConfig):
    return [(s, min(s + config.chunk_size, config.samples))
            for s in range(0, config.samples, config.chunk_size)]


def _tau_stream(config, paths, tag):
    return RngStream(config.seed, paths, f"tau/{tag}")


def _pointwise(a):
    return np.linalg.norm(a, axis=-1)


def _convergence_chunk(config: ExperimentConfig, start: int, stop: int, repeats: int = 1) -> dict:
    problem = config.build_problem()
    T = problem.T
    paths = np.arange(start, stop)
    path = WienerPath(RngStream(config.seed, paths, "wiener"), T, problem.m)
    # The path is always laid down on the 2^-n_ref grid first, so the exact
    # and the numerical reference see the same Brownian realisation.
    path.query(dyadic_grid(T, max(config.n_ref, config.n_max)).times)

    if config.reference == "numerical":
        ref_grid = dyadic_grid(T, config.n_ref)
        ref = integrate(problem, ref_grid, SchemeKind.RANDOMIZED_MILSTEIN, path,
                        _tau_stream(config, paths, f"reference/n={config.n_ref}")).states

        def reference_on(grid, n):
            return ref[:, :: 2 ** (config.n_ref - n)]
    else:
        if not problem.has_oracle:
            raise ValueError(f"problem {problem.name!r} has no exact solution; use a numerical reference")

        def reference_on(grid, n):
            return problem.exact_on_grid(grid, path.query(grid.times))

    errors, cpu = {}, {}
    kinds = [SchemeKind.parse(s) for s in config.schemes]
    for n in config.levels:
        grid = dyadic_grid(T, n)
        target = reference_on(grid, n)
        noises = {}
        for kind in kinds:
            stream = _tau_stream(config, paths, f"{kind.value}/n={n}") if kind.randomized else None
            noises[kind] = sample_grid_noise(path, grid, stream)
        # Repeats are interleaved across schemes so that machine load
        # affects every scheme alike; the median is reported.
        times = {kind: [] for kind in kinds}
        for _ in range(repeats):
            for kind in kinds:
                t0 = time.process_time()
                traj = integrate(problem, grid, kind, noise=noises[kind])
                times[kind].append(time.process_time() - t0)
                if len(times[kind]) == 1:
                    if config.metric == "terminal":
                        errors[kind.value, n] = _pointwise(traj.states[:, -1] - target[:, -1])
                    else:
                        errors[kind.value, n] = _pointwise(traj.states - target).max(axis=1)
        for kind in kinds:
            cpu[kind.value, n] = float(np.median(times[kind]))
    return {"errors": errors, "cpu": cpu}


def _residual_chunk(config: ExperimentConfig, start: int, stop: int) -> dict:
    problem = config.build_problem()
    T = problem.T
    paths = np.arange(start, stop)
    path = WienerPath(RngStream(config.seed, paths, "wiener"), T, problem.m)
    path.query(dyadic_grid(T, config.n_max).times)
    parts = {}
    for n in config.levels:
        grid = dyadic_grid(T, n)
        noise = sample_grid_noise(path, grid, _tau_stream(config, paths, f"residual/n={n}"))
        exact = problem.exact_on_grid(grid, noise.w)
        parts[n] = spijker_parts(residual(problem, grid, exact, noise))
    return {"parts": parts}


def _run_chunks(config: ExperimentConfig, fn, *args) -> list:
    chunks = _chunks(config)
    if config.workers == 1 or len(chunks) == 1:
        return [fn(config, a, b, *args) for a, b in chunks]
    with ProcessPoolExecutor(max_workers=min(config.workers, len(chunks))) as pool:
        futures = [pool.submit(fn, config, a, b, *args) for a, b in chunks]
        return [f.result() for f in futures]


def _meta(config: ExperimentConfig, **extra) -> dict:
    meta = {"problem": config.problem, "problem_params": dict(config.problem_params),
            "reference": config.reference if config.reference == "exact" else f"randomized_milstein n_ref={config.n_ref}",
            "seed": config.seed, "metric": config.metric}
    meta.update(extra)
    return meta


def _collect(config: ExperimentConfig, timed: bool) -> ErrorReport:
    repeats = config.timing_repeats if timed else 1
    results = _run_chunks(config, _convergence_chunk, repeats)
    T = config.build_problem().T
    entries = []
    for scheme in config.schemes:
        for n in config.levels:
            per_path = np.concatenate([r["errors"][scheme, n] for r in results])
            err, se = lp_estimate(per_path, config.p)
            cpu = math.fsum(r["cpu"][scheme, n] for r in results) if timed else 0.0
            entries.append(ErrorEntry(scheme, n, 2.0**-n * T, config.samples, config.p, err, se, cpu))
    return ErrorReport(entries, meta=_meta(config))


def strong_convergence_study(config: ExperimentConfig) -> ErrorReport:
    """Strong L^p errors of every scheme on dyadic grids against a coupled reference.

    CPU times are not recorded (reported as 0) so the report is a pure
    function of the configuration.
    """
    return _collect(config, timed=False)


def work_precision_study(config: ExperimentConfig) -> ErrorReport:
    """As :func:`strong_convergence_study`, plus CPU seconds per (scheme, grid).

    Timing covers the step recursion of each run, summed over chunks. Each
    chunk's time is the median of ``timing_repeats`` interleaved runs.
    Sampling the coupled noise and computing the reference are excluded.
    """
    return _collect(config, timed=True)


def residual_decay_study(config: ExperimentConfig) -> ErrorReport:
    """Spijker norm of the exact solution's residual under the randomised scheme."""
    problem = config.build_problem()
    if not problem.has_oracle:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    results = _run_chunks(config, _residual_chunk)
    entries = []
    for n in config.levels:
        head = np.concatenate([r["parts"][n][0] for r in results])
        tail = np.concatenate([r["parts"][n][1] for r in results])
        a, sa = lp_estimate(head, config.p)
        b, sb = lp_estimate(tail, config.p)
        entries.append(ErrorEntry(SchemeKind.RANDOMIZED_MILSTEIN.value, n, 2.0**-n * problem.T,
                                  config.samples, config.p, a + b, sa + sb))
    return ErrorReport(entries, meta=_meta(config, reference="exact", metric="spijker"))
