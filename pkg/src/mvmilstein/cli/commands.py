"""Subcommand dispatch from an :class:`ExperimentConfig` to the experiment runners."""

import logging
from collections.abc import Callable

from mvmilstein.exceptions import SimulationDivergedError
from mvmilstein.experiments.ladder import run_convergence_ladder
from mvmilstein.experiments.oracle import run_oracle_suite
from mvmilstein.experiments.particles import run_lderiv_decay, run_poc_split
from mvmilstein.models.experiment import (
    ConvergenceLadderConfig,
    ExperimentConfig,
    OracleConfig,
    ParticleSweepConfig,
    Subcommand,
)
from mvmilstein.models.results import PathSummary, ResultTable
from mvmilstein.sde.model import BuiltinName, make_builtin
from mvmilstein.sde.noise import LevyAreaConfig
from mvmilstein.sde.schemes import EnsembleState, NodeMoments, TimeGrid, simulate_terminal, summarize_state

logger = logging.getLogger(__name__)


def _model_name(config: ExperimentConfig) -> BuiltinName:
    assert config.model is not None
    return config.model


def simulate(config: ExperimentConfig) -> PathSummary:
    """Simulate one ensemble and summarize every node; divergence yields a partial table."""
    model = make_builtin(_model_name(config), config.model_params())
    grid = TimeGrid(horizon=config.horizon, steps=config.steps)
    nodes: list[NodeMoments] = []

    def observe(state: EnsembleState) -> None:
        nodes.append(summarize_state(state))

    diverged_step = None
    try:
        simulate_terminal(
            model,
            config.scheme_spec(),
            grid,
            config.particles,
            config.seed,
            levy=LevyAreaConfig(truncation_terms=config.levy_terms) if config.levy_terms else None,
            divergence_threshold=config.divergence_threshold,
            observer=observe,
        )
    except SimulationDivergedError as e:
        logger.warning(f"Simulation diverged: {e}")
        diverged_step = e.step_index

    return PathSummary(
        seed=config.seed,
        nodes=nodes,
        diverged_step=diverged_step,
        partial=diverged_step is not None,
    )


def convergence(config: ExperimentConfig) -> ResultTable:
    """Strong-convergence ladder over ``config.levels``."""
    return run_convergence_ladder(
        ConvergenceLadderConfig(
            model=_model_name(config),
            params=config.model_params(),
            scheme=config.scheme_spec(),
            particles=config.particles,
            levels=config.levels,
            horizon=config.horizon,
            repetitions=config.repetitions,
            seed=config.seed,
            levy_terms=config.levy_terms,
            divergence_threshold=config.divergence_threshold,
            workers=config.workers,
        )
    )


def _sweep_config(config: ExperimentConfig) -> ParticleSweepConfig:
    return ParticleSweepConfig(
        model=_model_name(config),
        params=config.model_params(),
        scheme=config.scheme_spec(),
        steps=config.steps,
        particle_levels=config.particle_levels,
        horizon=config.horizon,
        repetitions=config.repetitions,
        seed=config.seed,
        levy_terms=config.levy_terms,
        divergence_threshold=config.divergence_threshold,
        workers=config.workers,
    )


def lderiv_decay(config: ExperimentConfig) -> ResultTable:
    """Tamed Euler versus the configured Milstein scheme over particle counts."""
    return run_lderiv_decay(_sweep_config(config))


def poc(config: ExperimentConfig) -> ResultTable:
    """Full system versus two half systems over particle counts."""
    return run_poc_split(_sweep_config(config))


def validate(config: ExperimentConfig) -> ResultTable:
    """Mean-field Ornstein-Uhlenbeck oracle cases."""
    return run_oracle_suite(
        OracleConfig(
            x0=config.x0,
            horizon=config.horizon,
            steps=config.steps,
            particles=config.particles,
            seed=config.seed,
            workers=config.workers,
        )
    )


HANDLERS: dict[Subcommand, Callable[[ExperimentConfig], ResultTable]] = {
    Subcommand.SIMULATE: simulate,
    Subcommand.CONVERGENCE: convergence,
    Subcommand.LDERIV_DECAY: lderiv_decay,
    Subcommand.POC: poc,
    Subcommand.VALIDATE: validate,
}


def run_command(config: ExperimentConfig) -> ResultTable:
    """Run the configured experiment and attach the effective configuration to the result."""
    logger.info(f"Running {config.command.value} (seed={config.seed}, workers={config.workers})")
    result = HANDLERS[config.command](config)
    return result.model_copy(update={"config": config.echo()})
