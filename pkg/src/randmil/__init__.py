"""Drift-randomised Milstein method for SDEs with time-irregular drift.

Modules: :mod:`grid` (temporal grids), :mod:`model` (problems and oracles),
:mod:`noise` (coupled Wiener paths, iterated integrals), :mod:`scheme`
(one-step maps and integration), :mod:`quadrature` (randomised Riemann sums),
:mod:`diagnostics` (error norms, residuals, EOC), :mod:`harness` (Monte
Carlo studies) and :mod:`cli`.
"""
from .diagnostics import (ErrorEntry, ErrorReport, eoc_regression, lp_estimate, lp_max_error,
                          residual, spijker_norm, terminal_lp_error)
from .grid import TemporalGrid, dyadic_grid, dyadic_refine, max_step, uniform_grid
from .harness import (ExperimentConfig, residual_decay_study, strong_convergence_study,
                      work_precision_study)
from .model import (SDEProblem, Trajectory, build_problem, custom_problem, gbm_problem,
                    holder_ode_problem, linear_multinoise_problem, paper_example_problem,
                    zero_problem)
from .noise import (WienerPath, bridge_query, chen_combine, iterated_integrals,
                    sample_grid_noise, sample_step_noise, scalar_iterated_integral)
from .quadrature import HolderIntegrand, quadrature_rate_study, randomized_riemann
from .rng import RngStream
from .scheme import (NonFiniteStateError, SchemeKind, classical_milstein_step, euler_step,
                     integrate, phi_increment, psi_stage, randomized_milstein_step)

__version__ = "0.1.0"
