"""entrisk: stochastic optimization of compositional entropic risk.

Minimizes averages of log-E-exp losses through their min-min dual form,
with a geometry-aware proximal mirror update for the dual variable, the
standard baselines recovered as special cases, and desk-scale benchmark
problems plus exact oracles for verifying the theory.
"""

from .core import (ALPHA_INF, CermProblem, ConvergenceBound, DualState, RunRecord,
                   StepSchedule, is_infinite_alpha, project_primal, run_rng,
                   sample_batch, schedule_alpha)
from .dataio import CsvSchema, FeatureDataset, least_squares_init, load_csv, standardize, write_csv
from .dual import (bregman_exp, dual_sgd_step, erm_rate_state, logmeanexp,
                   softplus_dual_value, spmd_step, spmd_step_batch)
from .errors import ConfigError, DataError, NumericalError
from .optimizers import (OptimizerConfig, asgd_run, bsgd_run, dual_only_run,
                         dual_only_runs, run_method, scent_run, sox_run, umax_run)
from .oracle import (Diagnostics, dual_optimum, erm_gap_bound, estimate_diagnostics,
                     full_joint_objective, full_objective, prox_bruteforce,
                     reported_objective, sgd_bound, spmd_bound)
from .problems import (DistributionStats, DualOnlyProblem, GaussianDual, TwoPointDual,
                       gaussian_dual, hard_instance_pair, kldro_problem,
                       multiclass_ce_problem, pauc_problem, synth_multiclass,
                       synth_pauc, synth_regression, two_point_dual)

__version__ = "0.1.0"
