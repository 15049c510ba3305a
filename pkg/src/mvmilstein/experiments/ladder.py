"""Strong-convergence ladders between consecutive time levels."""

import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy import stats

from mvmilstein.exceptions import InvalidInputError
from mvmilstein.experiments.jobs import JobOutcome, derive_seed, run_jobs
from mvmilstein.models.experiment import ConvergenceLadderConfig
from mvmilstein.models.results import ConvergenceResult, LevelRow
from mvmilstein.sde.measure import sequential_sum
from mvmilstein.sde.model import McKeanVlasovModel
from mvmilstein.sde.noise import LevyAreaConfig
from mvmilstein.sde.schemes import EnsembleState, TimeGrid, simulate_coupled_pair

logger = logging.getLogger(__name__)

MIN_SLOPE_POINTS = 3


def mean_squared_gap(a: EnsembleState, b: EnsembleState) -> float:
    """(1/N) sum_i (a_i - b_i)^2 for two coupled ensembles.

    Raises:
        InvalidInputError: If the particle counts differ.
    """
    if a.size != b.size:
        raise InvalidInputError(f"Ensembles differ in size: {a.size} vs {b.size}")
    gap = a.positions - b.positions
    return float(sequential_sum(gap * gap)) / a.size


def rmse_pathwise(a: EnsembleState, b: EnsembleState) -> float:
    """Root mean square gap between matched particles of two coupled ensembles."""
    return math.sqrt(mean_squared_gap(a, b))


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of log2(value) against level.

    Args:
        points: (level, value) pairs.

    Returns:
        (slope, standard error of the slope).

    Raises:
        InvalidInputError: With fewer than two points, a non-positive value or
            all levels equal.
    """
    if len(points) < 2:
        raise InvalidInputError(f"Need at least two points to fit a slope, got {len(points)}")
    levels = np.array([float(p[0]) for p in points])
    values = np.array([float(p[1]) for p in points])
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise InvalidInputError("Slope fitting needs finite positive values")
    if np.all(levels == levels[0]):
        raise InvalidInputError("Slope fitting needs at least two distinct levels")
    fit = stats.linregress(levels, np.log2(values))
    stderr = 0.0 if len(points) == 2 else float(fit.stderr)
    return float(fit.slope), stderr


def surviving_slope(points: Sequence[tuple[float, float | None]]) -> tuple[float | None, float | None]:
    """Fit a slope over the finite positive points, or return (None, None) if too few survive."""
    usable = [(lvl, v) for lvl, v in points if v is not None and v > 0]
    if len(usable) < MIN_SLOPE_POINTS:
        logger.warning(f"Only {len(usable)} usable points, no slope reported")
        return None, None
    return fit_loglog_slope([(lvl, v) for lvl, v in usable if v is not None])


def pooled_rmse(outcomes: Sequence[JobOutcome[float]]) -> tuple[float | None, int | None]:
    """Root of the mean squared gap over repetitions, in repetition order.

    Returns:
        (rmse, None) or (None, step index of the first divergence).
    """
    for outcome in outcomes:
        if outcome.diverged is not None:
            return None, outcome.diverged.step_index
    squares = np.array([o.value for o in outcomes], dtype=np.float64)
    return math.sqrt(float(sequential_sum(squares)) / len(outcomes)), None


def level_steps(level: int, horizon: float) -> int:
    """Fine step count M_l = 2^l T of a level; it must be even so it can be coarsened."""
    steps = round(2**level * horizon)
    if steps < 2 or steps % 2:
        raise InvalidInputError(f"Level {level} with T={horizon} gives M={steps}; need an even M >= 2")
    return steps


def run_convergence_ladder(
    config: ConvergenceLadderConfig, model: McKeanVlasovModel | None = None
) -> ConvergenceResult:
    """Run coupled fine/coarse simulations at every level and fit the decay rate.

    Level l compares M_l = 2^l T steps with its coarsening to M_l / 2 steps on
    the same Brownian path. RMSE^2 is averaged over the repetitions, each with
    its own seed derived from (l, r). A level that diverges is recorded and
    the ladder carries on; the result is then flagged partial.

    Args:
        config: Ladder configuration.
        model: Overrides the configured built-in model.

    Returns:
        Per-level RMSE and the slope of log2 RMSE against l.
    """
    mckean = model or config.resolve_model()
    steps = {level: level_steps(level, config.horizon) for level in config.levels}
    jobs = [(level, r) for level in config.levels for r in range(config.repetitions)]
    logger.info(
        f"Convergence ladder: model={mckean.name}, scheme={config.scheme.label}, "
        f"N={config.particles}, levels={list(config.levels)}, R={config.repetitions}"
    )

    def job(args: tuple[int, int]) -> float:
        level, rep = args
        grid = TimeGrid(horizon=config.horizon, steps=steps[level])
        levy = LevyAreaConfig(truncation_terms=config.levy_terms) if config.levy_terms else None
        fine, coarse = simulate_coupled_pair(
            mckean,
            config.scheme,
            grid,
            config.particles,
            derive_seed(config.seed, level, rep),
            levy=levy,
            divergence_threshold=config.divergence_threshold,
        )
        return mean_squared_gap(fine, coarse)

    outcomes = run_jobs(job, jobs, config.workers)

    rows: list[LevelRow] = []
    reps = config.repetitions
    for i, level in enumerate(config.levels):
        rmse, diverged_step = pooled_rmse(outcomes[i * reps : (i + 1) * reps])
        if rmse is None:
            logger.warning(f"Level {level} (M={steps[level]}) diverged at step {diverged_step}")
        else:
            logger.info(f"Level {level} (M={steps[level]}): RMSE={rmse:.6e}")
        rows.append(
            LevelRow(
                level=level,
                steps=steps[level],
                rmse=rmse,
                repetitions=reps,
                diverged_step=diverged_step,
            )
        )

    slope, stderr = surviving_slope([(row.level, row.rmse) for row in rows])
    partial = any(row.diverged_step is not None for row in rows)
    if partial:
        logger.warning("Convergence ladder finished with diverged levels; result is partial")
    return ConvergenceResult(seed=config.seed, levels=rows, slope=slope, stderr=stderr, partial=partial)
