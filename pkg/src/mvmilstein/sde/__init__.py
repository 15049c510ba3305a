"""Numerical core: models, empirical measures, noise and time steppers."""

from mvmilstein.sde.measure import (
    EmpiricalMeasureView,
    double_integrate,
    double_integrate_factored,
    integrate,
    mean,
    variance_of,
    wasserstein2_1d,
)
from mvmilstein.sde.model import (
    BUILTIN_NAMES,
    AssumptionReport,
    BuiltinModelParams,
    BuiltinName,
    McKeanVlasovModel,
    TamingVariant,
    builtin_from_name,
    linear_meanfield_model,
    make_builtin,
    probe_assumptions,
    tame_drift,
)
from mvmilstein.sde.noise import (
    LevyAreaConfig,
    NoiseBlock,
    NoiseChannel,
    StreamKey,
    coarsen_increments,
    coarsen_iterated,
    diagonal_iterated,
    levy_area,
    sample_cross_iterated,
    sample_increments,
    sample_noise_block,
    standard_normal,
)
from mvmilstein.sde.schemes import (
    EnsembleState,
    NodeMoments,
    SchemeKind,
    SchemeSpec,
    TimeGrid,
    ensemble_moment,
    simulate_coupled_pair,
    simulate_path,
    simulate_terminal,
    step_ensemble,
    summarize_path,
)

__all__ = [
    "BUILTIN_NAMES",
    "AssumptionReport",
    "BuiltinModelParams",
    "BuiltinName",
    "EmpiricalMeasureView",
    "EnsembleState",
    "LevyAreaConfig",
    "McKeanVlasovModel",
    "NodeMoments",
    "NoiseBlock",
    "NoiseChannel",
    "SchemeKind",
    "SchemeSpec",
    "StreamKey",
    "TamingVariant",
    "TimeGrid",
    "builtin_from_name",
    "coarsen_increments",
    "coarsen_iterated",
    "diagonal_iterated",
    "double_integrate",
    "double_integrate_factored",
    "ensemble_moment",
    "integrate",
    "levy_area",
    "linear_meanfield_model",
    "make_builtin",
    "mean",
    "probe_assumptions",
    "sample_cross_iterated",
    "sample_increments",
    "sample_noise_block",
    "simulate_coupled_pair",
    "simulate_path",
    "simulate_terminal",
    "standard_normal",
    "step_ensemble",
    "summarize_path",
    "tame_drift",
    "variance_of",
    "wasserstein2_1d",
]
