"""Solvers for rank-based mean-field competition with switching effort
regimes: entropy-regularized equilibria by fictitious play, a vanishing-
entropy bridge to the unregularized obstacle problem, and finite-
population Monte Carlo validation."""

from .errors import ConfigError, GibbsOverflowError, SolverError
from .model import (AggregateProgress, GridFunction, ModelSpec, RewardScheme,
                    TimeGrid, d_alpha, project_to_D, reward_eval, sup_norm,
                    validate_model)
from .hjb import (Policy, ValueFunction, best_response_generator,
                  generator_row_sums, gibbs_policy, softmax_initial,
                  solve_hjb_backward, stationary_value, value_bounds)
from .forward import (OccupationFlux, aggregate_progress, consistency_rho,
                      solve_forward)
from .fp import (FPState, best_response, default_initial_progress,
                 exploitability, fit_log_rate, fp_step, init_fp, payoff_J,
                 payoff_terms, run_fp)
from .vi import ViscosityResidual, solve_hjbvi, viscosity_residual
from .paths import (SwitchingPath, brute_force_best_response,
                    monotonicity_defect, pure_payoff, value_evolution,
                    value_evolution_stats)
from .limit import (DEFAULT_ETAS, SweepReport, VerificationReport, eta_sweep,
                    support_set, verify_relaxed_equilibrium)
from .simulate import (DeviationReport, PopulationReport, SimConfig,
                       deviation_test, sample_path, simulate_population)
from .config import RunConfig

__version__ = "0.1.0"
