"""Experiments over the particle count: L-derivative decay and propagation of chaos."""

import logging
import math
from abc import ABC, abstractmethod

import numpy as np

from mvmilstein.exceptions import InvalidInputError
from mvmilstein.experiments.jobs import derive_seed, run_jobs
from mvmilstein.experiments.ladder import mean_squared_gap, pooled_rmse, surviving_slope
from mvmilstein.models.experiment import ParticleSweepConfig
from mvmilstein.models.results import DecayRow, ParticleSweepResult
from mvmilstein.sde.model import McKeanVlasovModel
from mvmilstein.sde.noise import LevyAreaConfig, sample_noise_block
from mvmilstein.sde.schemes import (
    EnsembleState,
    SchemeSpec,
    TimeGrid,
    simulate_terminal,
    step_ensemble,
)

logger = logging.getLogger(__name__)


def phi(N: int, d: int) -> float:
    """Propagation-of-chaos rate in dimension d.

    N^(-1/2) for d < 4, N^(-1/2) ln N for d = 4 and N^(-2/d) for d > 4.

    Raises:
        InvalidInputError: If N or d is not positive, or d = 4 with N < 2.
    """
    if N < 1 or d < 1:
        raise InvalidInputError(f"phi needs positive N and d, got N={N}, d={d}")
    if d < 4:
        return N**-0.5
    if d == 4:
        if N < 2:
            raise InvalidInputError("phi with d = 4 needs N >= 2")
        return N**-0.5 * math.log(N)
    return float(N ** (-2.0 / d))


def _levy(config: ParticleSweepConfig) -> LevyAreaConfig:
    if config.levy_terms:
        return LevyAreaConfig(truncation_terms=config.levy_terms)
    return LevyAreaConfig.for_steps(config.steps)


class _GapJob(ABC):
    """Mean squared gap at particle level l, repetition r."""

    def __init__(self, config: ParticleSweepConfig, model: McKeanVlasovModel) -> None:
        self.config = config
        self.model = model
        self.grid = TimeGrid(horizon=config.horizon, steps=config.steps)

    def seed(self, level: int, rep: int) -> int:
        return derive_seed(self.config.seed, level, rep)

    @abstractmethod
    def __call__(self, job: tuple[int, int]) -> float:
        """Mean squared gap of one (level, repetition) job."""


class _LDerivGap(_GapJob):
    def __call__(self, job: tuple[int, int]) -> float:
        level, rep = job
        cfg = self.config
        n = 2**level
        seed = self.seed(level, rep)
        reference = SchemeSpec.tamed_euler(cfg.scheme.taming)
        levy = _levy(cfg) if cfg.scheme.include_lions_term else None

        euler = EnsembleState.initial(self.model, self.grid, n)
        milstein = EnsembleState.initial(self.model, self.grid, n)
        for step in range(self.grid.steps):
            noise = sample_noise_block(seed, step, n, self.grid.delta, levy)
            euler = step_ensemble(euler, self.model, reference, noise, cfg.divergence_threshold)
            milstein = step_ensemble(milstein, self.model, cfg.scheme, noise, cfg.divergence_threshold)
        return mean_squared_gap(euler, milstein)


class _SplitGap(_GapJob):
    def __call__(self, job: tuple[int, int]) -> float:
        level, rep = job
        cfg = self.config
        n = 2**level
        half = n // 2
        seed = self.seed(level, rep)
        levy = _levy(cfg) if cfg.scheme.include_lions_term else None

        def run(size: int, offset: int) -> EnsembleState:
            return simulate_terminal(
                self.model,
                cfg.scheme,
                self.grid,
                size,
                seed,
                levy=levy,
                particle_offset=offset,
                divergence_threshold=cfg.divergence_threshold,
            )

        full = run(n, 0)
        split = np.concatenate([run(half, 0).positions, run(half, half).positions])
        return mean_squared_gap(full, EnsembleState(split, full.step_index, self.grid))


def _sweep(
    config: ParticleSweepConfig,
    label: str,
    gap: _GapJob,
) -> ParticleSweepResult:
    jobs = [(level, r) for level in config.particle_levels for r in range(config.repetitions)]
    outcomes = run_jobs(gap, jobs, config.workers)

    rows: list[DecayRow] = []
    reps = config.repetitions
    for i, level in enumerate(config.particle_levels):
        rmse, diverged_step = pooled_rmse(outcomes[i * reps : (i + 1) * reps])
        if rmse is None:
            logger.warning(f"{label}: N={2**level} diverged at step {diverged_step}")
        else:
            logger.info(f"{label}: N={2**level}, RMSE={rmse:.6e}")
        rows.append(
            DecayRow(
                level=level,
                particles=2**level,
                rmse=rmse,
                repetitions=reps,
                diverged_step=diverged_step,
            )
        )

    slope, stderr = surviving_slope([(row.level, row.rmse) for row in rows])
    partial = any(row.diverged_step is not None for row in rows)
    if partial:
        logger.warning(f"{label} finished with diverged particle counts; result is partial")
    return ParticleSweepResult(
        seed=config.seed,
        steps=config.steps,
        table=rows,
        slope=slope,
        stderr=stderr,
        partial=partial,
    )


def run_lderiv_decay(
    config: ParticleSweepConfig, model: McKeanVlasovModel | None = None
) -> ParticleSweepResult:
    """RMSE between tamed Euler and the configured Milstein scheme for N_l = 2^l.

    Both schemes step on the same noise blocks, so the gap is the accumulated
    contribution of the Milstein correction terms. With both correction flags
    off the two schemes coincide and every RMSE is zero.
    """
    mckean = model or config.resolve_model()
    logger.info(
        f"L-derivative decay: model={mckean.name}, scheme={config.scheme.label}, "
        f"M={config.steps}, particle levels={list(config.particle_levels)}"
    )
    return _sweep(config, "lderiv-decay", _LDerivGap(config, mckean))


def run_poc_split(
    config: ParticleSweepConfig, model: McKeanVlasovModel | None = None
) -> ParticleSweepResult:
    """RMSE between the N_l system and two independent N_l / 2 systems on the same streams.

    The first half-system is driven by Brownian streams 0 .. N_l/2 - 1 and the
    second by N_l/2 .. N_l - 1, matching particles of the full system one to one.
    """
    mckean = model or config.resolve_model()
    logger.info(
        f"Propagation-of-chaos split: model={mckean.name}, scheme={config.scheme.label}, "
        f"M={config.steps}, particle levels={list(config.particle_levels)}"
    )
    return _sweep(config, "poc", _SplitGap(config, mckean))
