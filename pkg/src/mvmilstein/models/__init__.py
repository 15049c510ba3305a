"""Configuration and result models for mvmilstein."""

from mvmilstein.models.experiment import (
    ConvergenceLadderConfig,
    ExperimentConfig,
    MomentStabilityConfig,
    OracleCase,
    OracleConfig,
    OutputFormat,
    ParticleSweepConfig,
    Subcommand,
)
from mvmilstein.models.results import (
    ConvergenceResult,
    DecayRow,
    LevelRow,
    MomentRow,
    MomentStabilityResult,
    OracleReport,
    ParticleSweepResult,
    PathSummary,
    ResultTable,
    ValidationResult,
)

__all__ = [
    "ConvergenceLadderConfig",
    "ConvergenceResult",
    "DecayRow",
    "ExperimentConfig",
    "LevelRow",
    "MomentRow",
    "MomentStabilityConfig",
    "MomentStabilityResult",
    "OracleCase",
    "OracleConfig",
    "OracleReport",
    "OutputFormat",
    "ParticleSweepConfig",
    "ParticleSweepResult",
    "PathSummary",
    "ResultTable",
    "Subcommand",
    "ValidationResult",
]
