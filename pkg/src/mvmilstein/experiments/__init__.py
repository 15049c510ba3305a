"""Numerical experiments: convergence ladders, particle sweeps and oracles."""

from mvmilstein.experiments.jobs import derive_seed, run_jobs
from mvmilstein.experiments.ladder import (
    fit_loglog_slope,
    rmse_pathwise,
    run_convergence_ladder,
)
from mvmilstein.experiments.oracle import (
    run_meanfield_ou_oracle,
    run_moment_stability,
    run_oracle_suite,
)
from mvmilstein.experiments.particles import phi, run_lderiv_decay, run_poc_split

__all__ = [
    "derive_seed",
    "fit_loglog_slope",
    "phi",
    "rmse_pathwise",
    "run_convergence_ladder",
    "run_jobs",
    "run_lderiv_decay",
    "run_meanfield_ou_oracle",
    "run_moment_stability",
    "run_oracle_suite",
    "run_poc_split",
]
