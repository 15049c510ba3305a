"""Experiment configuration models."""

from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mvmilstein.sde.model import (
    BuiltinModelParams,
    BuiltinName,
    McKeanVlasovModel,
    TamingVariant,
    make_builtin,
)
from mvmilstein.sde.schemes import DEFAULT_DIVERGENCE_THRESHOLD, SchemeKind, SchemeSpec

_SEED_LIMIT = 2**64


def _strictly_increasing(values: tuple[int, ...], what: str) -> tuple[int, ...]:
    if not values:
        raise ValueError(f"{what} must not be empty")
    if any(v < 1 for v in values):
        raise ValueError(f"{what} must be positive exponents")
    if any(b <= a for a, b in zip(values, values[1:], strict=False)):
        raise ValueError(f"{what} must be strictly increasing")
    return values


class Subcommand(str, Enum):
    """CLI subcommands, one per kind of experiment."""

    SIMULATE = "simulate"
    CONVERGENCE = "convergence"
    LDERIV_DECAY = "lderiv-decay"
    POC = "poc"
    VALIDATE = "validate"


class OutputFormat(str, Enum):
    """Result file formats."""

    CSV = "csv"
    JSON = "json"


class _ModelSelection(BaseModel):
    """Built-in model plus its parameters."""

    model_config = ConfigDict(frozen=True)

    model: BuiltinName = Field(..., description="Built-in model identifier")
    params: BuiltinModelParams = Field(default_factory=BuiltinModelParams)

    def resolve_model(self) -> McKeanVlasovModel:
        """Instantiate the selected built-in model."""
        return make_builtin(self.model, self.params)


class ConvergenceLadderConfig(_ModelSelection):
    """Strong-convergence ladder over time levels M_l = 2^l T."""

    scheme: SchemeSpec = Field(default_factory=SchemeSpec)
    particles: int = Field(default=1000, gt=0, description="Particle count N")
    levels: tuple[int, ...] = Field(default=(4, 5, 6, 7, 8, 9, 10))
    horizon: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    repetitions: int = Field(default=1, gt=0)
    seed: int = Field(default=0, ge=0, lt=_SEED_LIMIT)
    levy_terms: int | None = Field(default=None, gt=0)
    divergence_threshold: float = Field(default=DEFAULT_DIVERGENCE_THRESHOLD, gt=0)
    workers: int = Field(default=1, gt=0)

    @field_validator("levels")
    @classmethod
    def validate_levels(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """Levels must be strictly increasing positive exponents."""
        return _strictly_increasing(v, "levels")


class ParticleSweepConfig(_ModelSelection):
    """Sweep over particle counts N_l = 2^l at a fixed time grid."""

    scheme: SchemeSpec = Field(
        default_factory=lambda: SchemeSpec.tamed_milstein(lions=True),
        description="Scheme under test; the L-derivative study compares it to tamed Euler",
    )
    steps: int = Field(default=64, gt=0, description="Number of time steps M")
    particle_levels: tuple[int, ...] = Field(default=(2, 3, 4, 5, 6))
    horizon: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    repetitions: int = Field(default=1, gt=0)
    seed: int = Field(default=0, ge=0, lt=_SEED_LIMIT)
    levy_terms: int | None = Field(default=None, gt=0)
    divergence_threshold: float = Field(default=DEFAULT_DIVERGENCE_THRESHOLD, gt=0)
    workers: int = Field(default=1, gt=0)

    @field_validator("particle_levels")
    @classmethod
    def validate_particle_levels(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """Particle exponents must be strictly increasing and at least 1."""
        return _strictly_increasing(v, "particle_levels")


class OracleCase(BaseModel):
    """Coefficients (a, c, s) of one mean-field Ornstein-Uhlenbeck case."""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., allow_inf_nan=False)
    c: float = Field(..., allow_inf_nan=False)
    s: float = Field(..., allow_inf_nan=False)


DEFAULT_ORACLE_CASES: tuple[OracleCase, ...] = (
    OracleCase(a=-1.0, c=0.5, s=0.3),
    OracleCase(a=0.0, c=0.0, s=1.0),
    OracleCase(a=1.0, c=-1.0, s=0.5),
)


class OracleConfig(BaseModel):
    """Closed-form validation against the mean-field Ornstein-Uhlenbeck model."""

    model_config = ConfigDict(frozen=True)

    cases: tuple[OracleCase, ...] = DEFAULT_ORACLE_CASES
    x0: float = Field(default=1.0, allow_inf_nan=False)
    horizon: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    steps: int = Field(default=256, gt=0)
    particles: int = Field(default=10_000, gt=1)
    seed: int = Field(default=0, ge=0, lt=_SEED_LIMIT)
    workers: int = Field(default=1, gt=0)

    @field_validator("steps")
    @classmethod
    def validate_steps(cls, v: int) -> int:
        """The bias estimate needs a coarsened grid, so M must be even."""
        if v % 2:
            raise ValueError("steps must be even")
        return v


class MomentStabilityConfig(_ModelSelection):
    """Max-over-time fourth moment across several grids."""

    scheme: SchemeSpec = Field(default_factory=SchemeSpec)
    particles: int = Field(default=1000, gt=0)
    step_counts: tuple[int, ...] = Field(default=(16, 256, 4096))
    horizon: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    repetitions: int = Field(default=1, gt=0, description="Independent seeds per grid")
    seed: int = Field(default=0, ge=0, lt=_SEED_LIMIT)
    divergence_threshold: float = Field(default=DEFAULT_DIVERGENCE_THRESHOLD, gt=0)
    workers: int = Field(default=1, gt=0)

    @field_validator("step_counts")
    @classmethod
    def validate_step_counts(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """Step counts must be positive."""
        if not v or any(m < 1 for m in v):
            raise ValueError("step_counts must be a non-empty list of positive integers")
        return v


class ExperimentConfig(BaseModel):
    """Fully resolved configuration of one CLI invocation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Subcommand
    model: BuiltinName | None = None
    scheme: SchemeKind = SchemeKind.MILSTEIN
    taming: TamingVariant = TamingVariant.SCHEME1
    lions: bool | None = Field(default=None, description="None means the scheme default")
    gradient: bool | None = Field(default=None, description="None means the scheme default")
    horizon: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    sigma: float = Field(default=1.5, gt=0, allow_inf_nan=False)
    coupling_c: float = Field(default=0.5, allow_inf_nan=False)
    x0: float = Field(default=1.0, allow_inf_nan=False)
    steps: int = Field(default=256, gt=0)
    levels: tuple[int, ...] = (4, 5, 6, 7, 8, 9, 10)
    particles: int = Field(default=10_000, gt=0)
    particle_levels: tuple[int, ...] = (2, 3, 4, 5, 6)
    repetitions: int = Field(default=1, gt=0)
    seed: int = Field(default=20240601, ge=0, lt=_SEED_LIMIT)
    levy_terms: int | None = Field(default=None, gt=0)
    out: Path | None = None
    output_format: OutputFormat = OutputFormat.CSV
    workers: int = Field(default=1, gt=0)
    divergence_threshold: float = Field(default=DEFAULT_DIVERGENCE_THRESHOLD, gt=0)

    @field_validator("levels")
    @classmethod
    def validate_levels(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """Levels must be strictly increasing positive exponents."""
        return _strictly_increasing(v, "levels")

    @field_validator("particle_levels")
    @classmethod
    def validate_particle_levels(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """Particle exponents must be strictly increasing positive exponents."""
        return _strictly_increasing(v, "particle_levels")

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        """Reject a missing model and Milstein terms on tamed Euler."""
        if self.model is None and self.command is not Subcommand.VALIDATE:
            raise ValueError("model is required")
        if self.scheme is SchemeKind.TAMED_EULER and (self.lions or self.gradient):
            raise ValueError("tamed-euler cannot include the lions or gradient terms")
        return self

    def scheme_spec(self) -> SchemeSpec:
        """The scheme selected by the kind, taming and term flags."""
        if self.scheme is SchemeKind.TAMED_EULER:
            return SchemeSpec.tamed_euler(self.taming)
        return SchemeSpec(
            kind=SchemeKind.MILSTEIN,
            taming=self.taming,
            include_state_gradient_term=True if self.gradient is None else self.gradient,
            include_lions_term=bool(self.lions),
        )

    def model_params(self) -> BuiltinModelParams:
        """Parameters of the built-in model."""
        return BuiltinModelParams(sigma_param=self.sigma, c=self.coupling_c, x0=self.x0)

    def echo(self) -> dict[str, str]:
        """Flat key/value view of the effective configuration, in field order."""
        items: dict[str, str] = {}
        for key, value in self.model_dump(mode="json").items():
            if key in ("out", "workers"):
                continue
            if isinstance(value, bool):
                value = "on" if value else "off"
            elif isinstance(value, list):
                value = " ".join(str(v) for v in value)
            items[key] = "" if value is None else str(value)
        return items
