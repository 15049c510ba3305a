"""Result tables produced by the experiments.

Every result exposes the same tabular view (``header``, ``rows`` and a
``trailer`` of summary values) so the CLI can write any of them as CSV.
"""

from abc import ABC, abstractmethod

from pydantic import BaseModel, ConfigDict, Field

from mvmilstein.sde.schemes import NodeMoments

CellValue = int | float | str | bool | None


class ResultTable(BaseModel, ABC):
    """Common fields of every result."""

    model_config = ConfigDict(populate_by_name=True)

    seed: int = Field(..., description="Base seed of the run")
    partial: bool = Field(default=False, description="True when a divergence was recorded")
    config: dict[str, str] = Field(
        default_factory=dict, description="Effective configuration echoed by the CLI"
    )

    @abstractmethod
    def header(self) -> tuple[str, ...]:
        """Column names of the table."""

    @abstractmethod
    def rows(self) -> list[tuple[CellValue, ...]]:
        """Table rows in column order."""

    def trailer(self) -> dict[str, CellValue]:
        """Summary values written after the table."""
        return {"seed": self.seed}


class LevelRow(BaseModel):
    """RMSE between levels l and l - 1."""

    model_config = ConfigDict(populate_by_name=True)

    level: int
    steps: int = Field(..., alias="M", description="Fine steps M_l")
    rmse: float | None = Field(default=None, ge=0, description="None when the level diverged")
    repetitions: int = Field(..., gt=0)
    diverged_step: int | None = Field(default=None, exclude=True)


class ConvergenceResult(ResultTable):
    """Per-level RMSE table and fitted log2 slope."""

    levels: list[LevelRow] = Field(default_factory=list)
    slope: float | None = None
    stderr: float | None = None

    def header(self) -> tuple[str, ...]:
        return ("level", "M", "rmse", "repetitions")

    def rows(self) -> list[tuple[CellValue, ...]]:
        return [(r.level, r.steps, r.rmse, r.repetitions) for r in self.levels]

    def trailer(self) -> dict[str, CellValue]:
        return {"slope": self.slope, "stderr": self.stderr, "seed": self.seed}

    def rmse_at(self, level: int) -> float | None:
        """RMSE recorded for ``level`` (None if absent or diverged)."""
        for row in self.levels:
            if row.level == level:
                return row.rmse
        return None


class DecayRow(BaseModel):
    """RMSE at one particle count N_l = 2^l."""

    model_config = ConfigDict(populate_by_name=True)

    level: int
    particles: int = Field(..., alias="N")
    rmse: float | None = Field(default=None, ge=0)
    repetitions: int = Field(..., gt=0)
    diverged_step: int | None = Field(default=None, exclude=True)


class ParticleSweepResult(ResultTable):
    """RMSE table over particle counts and fitted slope against log2 N."""

    steps: int = Field(..., gt=0, description="Time steps M of every run")
    table: list[DecayRow] = Field(default_factory=list)
    slope: float | None = None
    stderr: float | None = None

    def header(self) -> tuple[str, ...]:
        return ("level", "N", "rmse", "repetitions")

    def rows(self) -> list[tuple[CellValue, ...]]:
        return [(r.level, r.particles, r.rmse, r.repetitions) for r in self.table]

    def trailer(self) -> dict[str, CellValue]:
        return {"slope": self.slope, "stderr": self.stderr, "seed": self.seed}


class PathSummary(ResultTable):
    """Per-node moments of one simulated ensemble."""

    nodes: list[NodeMoments] = Field(default_factory=list)
    diverged_step: int | None = None

    def header(self) -> tuple[str, ...]:
        return ("step", "time", "mean", "second_moment", "fourth_moment", "max_abs")

    def rows(self) -> list[tuple[CellValue, ...]]:
        return [
            (n.step, n.time, n.mean, n.second_moment, n.fourth_moment, n.max_abs)
            for n in self.nodes
        ]

    def trailer(self) -> dict[str, CellValue]:
        return {"seed": self.seed, "diverged_step": self.diverged_step}


class OracleReport(BaseModel):
    """Ensemble versus closed form for one mean-field Ornstein-Uhlenbeck case.

    When the ensemble diverged the ensemble-derived fields are None, the case
    does not pass and the divergence location is recorded.
    """

    a: float
    c: float
    s: float
    exact_mean: float
    ensemble_mean: float | None = None
    error: float | None = Field(default=None, ge=0, description="|ensemble mean - exact mean|")
    standard_error: float | None = Field(
        default=None, ge=0, description="Monte Carlo standard error of the mean"
    )
    bias_allowance: float | None = Field(
        default=None, ge=0, description="O(delta) bias estimated from two grids"
    )
    band: float | None = Field(default=None, ge=0, description="3 standard errors plus the bias allowance")
    exact_variance: float
    ensemble_variance: float | None = None
    passed: bool
    diverged_step: int | None = Field(default=None, description="Step at which the ensemble diverged")
    diverged_particle: int | None = Field(default=None, description="First particle past the threshold")


class ValidationResult(ResultTable):
    """All oracle cases of one validation run."""

    steps: int = Field(..., gt=0)
    particles: int = Field(..., gt=0)
    reports: list[OracleReport] = Field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        """True when every case lies inside its band."""
        return all(r.passed for r in self.reports)

    def header(self) -> tuple[str, ...]:
        return (
            "a",
            "c",
            "s",
            "exact_mean",
            "ensemble_mean",
            "error",
            "band",
            "exact_variance",
            "ensemble_variance",
            "passed",
            "diverged_step",
        )

    def rows(self) -> list[tuple[CellValue, ...]]:
        return [
            (
                r.a,
                r.c,
                r.s,
                r.exact_mean,
                r.ensemble_mean,
                r.error,
                r.band,
                r.exact_variance,
                r.ensemble_variance,
                r.passed,
                r.diverged_step,
            )
            for r in self.reports
        ]

    def trailer(self) -> dict[str, CellValue]:
        return {"passed": self.all_passed, "partial": self.partial, "seed": self.seed}


class MomentRow(BaseModel):
    """Max-over-time fourth moment of one run."""

    steps: int = Field(..., gt=0)
    repetition: int = Field(..., ge=0)
    max_fourth_moment: float | None = Field(default=None, description="None when diverged")
    diverged_step: int | None = None


class MomentStabilityResult(ResultTable):
    """Fourth-moment bounds across grids."""

    runs: list[MomentRow] = Field(default_factory=list)

    @property
    def diverged_count(self) -> int:
        """Number of runs that diverged."""
        return sum(1 for r in self.runs if r.diverged_step is not None)

    @property
    def spread_ratio(self) -> float | None:
        """Largest over smallest max-over-time fourth moment among finished runs."""
        values = [r.max_fourth_moment for r in self.runs if r.max_fourth_moment is not None]
        if not values or min(values) <= 0:
            return None
        return max(values) / min(values)

    def header(self) -> tuple[str, ...]:
        return ("M", "repetition", "max_fourth_moment", "diverged_step")

    def rows(self) -> list[tuple[CellValue, ...]]:
        return [(r.steps, r.repetition, r.max_fourth_moment, r.diverged_step) for r in self.runs]

    def trailer(self) -> dict[str, CellValue]:
        return {"spread_ratio": self.spread_ratio, "seed": self.seed}
