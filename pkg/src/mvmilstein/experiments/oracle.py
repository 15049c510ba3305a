"""Closed-form validation and moment-stability probes."""

import logging
import math

from mvmilstein.experiments.jobs import derive_seed, run_jobs
from mvmilstein.models.experiment import MomentStabilityConfig, OracleCase, OracleConfig
from mvmilstein.models.results import (
    MomentRow,
    MomentStabilityResult,
    OracleReport,
    ValidationResult,
)
from mvmilstein.sde.measure import sequential_sum
from mvmilstein.sde.model import McKeanVlasovModel, linear_meanfield_model
from mvmilstein.sde.schemes import (
    EnsembleState,
    SchemeSpec,
    TimeGrid,
    ensemble_moment,
    simulate_coupled_pair,
    simulate_terminal,
)

logger = logging.getLogger(__name__)

BAND_STANDARD_ERRORS = 3.0
BIAS_SAFETY = 2.0


def ou_exact_mean(a: float, c: float, x0: float, t: float) -> float:
    """E[X_t] = x0 exp((a + c) t) of dX = (a X + c E[X]) dt + s dW."""
    return x0 * math.exp((a + c) * t)


def ou_exact_variance(a: float, s: float, t: float) -> float:
    """Var(X_t) = s^2 (exp(2 a t) - 1) / (2 a), or s^2 t when a = 0."""
    if a == 0.0:
        return s * s * t
    return s * s * math.expm1(2.0 * a * t) / (2.0 * a)


def _ensemble_moments(state: EnsembleState) -> tuple[float, float]:
    x = state.positions
    m = state.measure.stats.mean
    centered = x - m
    return m, float(sequential_sum(centered * centered)) / state.size


def run_meanfield_ou_oracle(
    a: float,
    c: float,
    s: float,
    x0: float,
    T: float,
    M: int,
    N: int,
    seed: int,
) -> OracleReport:
    """Compare the simulated mean-field Ornstein-Uhlenbeck mean with its closed form.

    The model is simulated with standard Milstein (constant diffusion, so it
    coincides with Euler) on M steps and, on the same Brownian path, on M / 2
    steps. Twice the gap between the two means serves as the O(delta) bias
    allowance; the case passes when the error lies within three Monte Carlo
    standard errors plus that allowance.

    Args:
        a: Linear drift coefficient.
        c: Weight of the mean in the drift.
        s: Constant diffusion.
        x0: Initial value.
        T: Horizon.
        M: Fine step count (even).
        N: Number of particles.
        seed: Base seed.

    Returns:
        The report for this case.
    """
    model = linear_meanfield_model(a, c, s, x0)
    grid = TimeGrid(horizon=T, steps=M)
    fine, coarse = simulate_coupled_pair(model, SchemeSpec.standard_milstein(lions=False), grid, N, seed)

    mean_fine, var_fine = _ensemble_moments(fine)
    mean_coarse = coarse.measure.stats.mean
    exact_mean = ou_exact_mean(a, c, x0, T)

    standard_error = math.sqrt(var_fine / N)
    bias = BIAS_SAFETY * abs(mean_fine - mean_coarse)
    band = BAND_STANDARD_ERRORS * standard_error + bias
    error = abs(mean_fine - exact_mean)
    passed = error <= band
    if not passed:
        logger.warning(f"OU oracle (a={a}, c={c}, s={s}): error {error:.3e} outside band {band:.3e}")

    return OracleReport(
        a=a,
        c=c,
        s=s,
        exact_mean=exact_mean,
        ensemble_mean=mean_fine,
        error=error,
        standard_error=standard_error,
        bias_allowance=bias,
        band=band,
        exact_variance=ou_exact_variance(a, s, T),
        ensemble_variance=var_fine,
        passed=passed,
    )


def run_oracle_suite(config: OracleConfig) -> ValidationResult:
    """Run every configured oracle case, each with its own derived seed."""
    cases = list(enumerate(config.cases))

    def job(item: tuple[int, OracleCase]) -> OracleReport:
        index, case = item
        return run_meanfield_ou_oracle(
            case.a,
            case.c,
            case.s,
            config.x0,
            config.horizon,
            config.steps,
            config.particles,
            derive_seed(config.seed, index),
        )

    reports = []
    for (_, case), outcome in zip(cases, run_jobs(job, cases, config.workers), strict=True):
        if outcome.diverged is not None:
            error = outcome.diverged
            logger.warning(
                f"OU oracle (a={case.a}, c={case.c}, s={case.s}) diverged at step "
                f"{error.step_index}, particle {error.particle}"
            )
            reports.append(
                OracleReport(
                    a=case.a,
                    c=case.c,
                    s=case.s,
                    exact_mean=ou_exact_mean(case.a, case.c, config.x0, config.horizon),
                    exact_variance=ou_exact_variance(case.a, case.s, config.horizon),
                    passed=False,
                    diverged_step=error.step_index,
                    diverged_particle=error.particle,
                )
            )
            continue
        assert outcome.value is not None
        reports.append(outcome.value)

    result = ValidationResult(
        seed=config.seed,
        steps=config.steps,
        particles=config.particles,
        reports=reports,
        partial=any(r.diverged_step is not None for r in reports),
    )
    logger.info(f"Oracle validation: {sum(r.passed for r in reports)}/{len(reports)} cases passed")
    return result


def run_moment_stability(
    config: MomentStabilityConfig, model: McKeanVlasovModel | None = None
) -> MomentStabilityResult:
    """Track the max-over-time ensemble fourth moment for several grids.

    Each (M, repetition) run records max_n (1/N) sum_i |Y_i(t_n)|^4, or the step
    at which it diverged.
    """
    mckean = model or config.resolve_model()
    jobs = [(steps, r) for steps in config.step_counts for r in range(config.repetitions)]

    def job(args: tuple[int, int]) -> float:
        steps, rep = args
        peak = [0.0]

        def observe(state: EnsembleState) -> None:
            peak[0] = max(peak[0], ensemble_moment(state, 4))

        simulate_terminal(
            mckean,
            config.scheme,
            TimeGrid(horizon=config.horizon, steps=steps),
            config.particles,
            derive_seed(config.seed, steps, rep),
            divergence_threshold=config.divergence_threshold,
            observer=observe,
        )
        return peak[0]

    rows = []
    for (steps, rep), outcome in zip(jobs, run_jobs(job, jobs, config.workers), strict=True):
        diverged_step = outcome.diverged.step_index if outcome.diverged is not None else None
        if diverged_step is not None:
            logger.warning(f"Moment probe M={steps}, repetition {rep} diverged at step {diverged_step}")
        rows.append(
            MomentRow(
                steps=steps,
                repetition=rep,
                max_fourth_moment=outcome.value,
                diverged_step=diverged_step,
            )
        )

    result = MomentStabilityResult(
        seed=config.seed, runs=rows, partial=any(r.diverged_step is not None for r in rows)
    )
    logger.info(
        f"Moment stability: spread ratio {result.spread_ratio}, {result.diverged_count} diverged runs"
    )
    return result

