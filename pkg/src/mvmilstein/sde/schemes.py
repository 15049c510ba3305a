"""Time steppers for the interacting particle system.

One step of the tamed Milstein scheme for particle i reads

    Y'_i = Y_i + b_delta(Y_i, mu) delta + sigma(Y_i, mu) dW_i
           + grad sigma(Y_i, mu) sigma(Y_i, mu) (dW_i^2 - delta) / 2
           + (1/N) sum_j D^L sigma(Y_i, mu)(Y_j) sigma(Y_j, mu) I(j, i),

where mu is the empirical measure of the input slice and b_delta the tamed
drift. Tamed Euler keeps only the first line.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mvmilstein.exceptions import InvalidInputError, SimulationDivergedError
from mvmilstein.sde.measure import EmpiricalMeasureView, FloatArray, sequential_sum
from mvmilstein.sde.model import McKeanVlasovModel, TamingVariant, tame_drift
from mvmilstein.sde.noise import (
    LevyAreaConfig,
    NoiseBlock,
    coarsen_iterated,
    sample_noise_block,
)

logger = logging.getLogger(__name__)

DEFAULT_DIVERGENCE_THRESHOLD = 1e150


class TimeGrid(BaseModel):
    """Uniform partition of [0, T] into M steps."""

    model_config = ConfigDict(frozen=True)

    horizon: float = Field(..., gt=0, allow_inf_nan=False, description="Final time T")
    steps: int = Field(..., gt=0, description="Number of steps M")

    @property
    def delta(self) -> float:
        """Step size T / M."""
        return self.horizon / self.steps

    def node(self, n: int) -> float:
        """Time t_n = n delta, with t_M = T exactly."""
        if not 0 <= n <= self.steps:
            raise InvalidInputError(f"node index {n} outside 0..{self.steps}")
        if n == self.steps:
            return self.horizon
        return n * self.delta

    def coarsened(self) -> "TimeGrid":
        """The grid with every other node (M must be even)."""
        if self.steps % 2:
            raise InvalidInputError(f"Cannot coarsen a grid with an odd step count {self.steps}")
        return TimeGrid(horizon=self.horizon, steps=self.steps // 2)


class SchemeKind(str, Enum):
    """Family of time stepper."""

    TAMED_EULER = "tamed-euler"
    MILSTEIN = "milstein"


class SchemeSpec(BaseModel):
    """Which terms a step includes and how the drift is tamed."""

    model_config = ConfigDict(frozen=True)

    kind: SchemeKind = SchemeKind.MILSTEIN
    taming: TamingVariant = TamingVariant.SCHEME1
    include_state_gradient_term: bool = True
    include_lions_term: bool = False

    @model_validator(mode="before")
    @classmethod
    def euler_has_no_milstein_terms(cls, data: Any) -> Any:
        """Tamed Euler forces both Milstein-term flags off."""
        if isinstance(data, dict) and SchemeKind(data.get("kind", SchemeKind.MILSTEIN)) is (
            SchemeKind.TAMED_EULER
        ):
            data = {**data, "include_state_gradient_term": False, "include_lions_term": False}
        return data

    @classmethod
    def tamed_euler(cls, taming: TamingVariant = TamingVariant.SCHEME1) -> "SchemeSpec":
        """Tamed Euler (explicit Euler when taming is NONE)."""
        return cls(kind=SchemeKind.TAMED_EULER, taming=taming)

    @classmethod
    def tamed_milstein(
        cls, taming: TamingVariant = TamingVariant.SCHEME1, lions: bool = True
    ) -> "SchemeSpec":
        """Tamed Milstein, with or without the Lions-derivative terms."""
        return cls(kind=SchemeKind.MILSTEIN, taming=taming, include_lions_term=lions)

    @classmethod
    def standard_milstein(cls, lions: bool = True) -> "SchemeSpec":
        """Milstein without taming, for globally Lipschitz drifts."""
        return cls(kind=SchemeKind.MILSTEIN, taming=TamingVariant.NONE, include_lions_term=lions)

    @property
    def label(self) -> str:
        """Short human-readable name used in logs."""
        if self.kind is SchemeKind.TAMED_EULER:
            return f"tamed-euler[{self.taming.value}]"
        lions = "+lions" if self.include_lions_term else ""
        return f"milstein[{self.taming.value}]{lions}"


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """All particle positions at one node of the grid."""

    positions: FloatArray = field(repr=False)
    step_index: int
    grid: TimeGrid

    def __post_init__(self) -> None:
        arr = np.array(self.positions, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise InvalidInputError("An ensemble needs at least one particle")
        arr.flags.writeable = False
        object.__setattr__(self, "positions", arr)

    @property
    def size(self) -> int:
        """Number of particles N."""
        return int(self.positions.size)

    @property
    def time(self) -> float:
        """Time of this node."""
        return self.grid.node(self.step_index)

    @cached_property
    def measure(self) -> EmpiricalMeasureView:
        """Empirical measure of this slice."""
        return EmpiricalMeasureView(self.positions)

    @classmethod
    def initial(cls, model: McKeanVlasovModel, grid: TimeGrid, N: int) -> "EnsembleState":
        """X0 replicated over N particles at node 0."""
        if N < 1:
            raise InvalidInputError(f"N must be positive, got {N}")
        return cls(np.full(N, model.initial_value, dtype=np.float64), 0, grid)


def ensemble_moment(state: EnsembleState, p: float) -> float:
    """Empirical p-th absolute moment (1/N) sum |Y_i|^p."""
    return float(sequential_sum(np.abs(state.positions) ** p)) / state.size


@dataclass(frozen=True)
class NodeMoments:
    """Ensemble statistics at one grid node."""

    step: int
    time: float
    mean: float
    second_moment: float
    fourth_moment: float
    max_abs: float


def summarize_state(state: EnsembleState) -> NodeMoments:
    """Mean, second and fourth moments and max |Y| of one slice."""
    return NodeMoments(
        step=state.step_index,
        time=state.time,
        mean=state.measure.stats.mean,
        second_moment=state.measure.stats.second_moment,
        fourth_moment=ensemble_moment(state, 4),
        max_abs=float(np.max(np.abs(state.positions))),
    )


def summarize_path(trajectory: list[EnsembleState]) -> list[NodeMoments]:
    """Summarize every slice of a trajectory."""
    return [summarize_state(state) for state in trajectory]


def _first_bad(values: FloatArray, threshold: float) -> int | None:
    bad = ~np.isfinite(values) | (np.abs(values) > threshold)
    if not bad.any():
        return None
    return int(np.argmax(bad))


def _ensure_finite(values: FloatArray, step_index: int, threshold: float) -> None:
    index = _first_bad(values, threshold)
    if index is not None:
        logger.debug(f"Divergence probe tripped at step {step_index}, particle {index}")
        raise SimulationDivergedError(step_index, index, float(values[index]))


def step_ensemble(
    state: EnsembleState,
    model: McKeanVlasovModel,
    spec: SchemeSpec,
    noise: NoiseBlock,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> EnsembleState:
    """Advance every particle by one step against the frozen input measure.

    Args:
        state: Input slice Y_{t_n}.
        model: Coefficients.
        spec: Scheme terms and taming.
        noise: Increments (and cross integrals when the Lions term is on).
        divergence_threshold: Any |Y| above this aborts the run.

    Returns:
        The slice Y_{t_{n+1}}.

    Raises:
        InvalidInputError: If the noise does not match the state or scheme.
        SimulationDivergedError: If a coefficient or output is non-finite or too large.
    """
    grid = state.grid
    if not math.isclose(noise.delta, grid.delta, rel_tol=1e-12):
        raise InvalidInputError(f"Noise step {noise.delta} does not match grid step {grid.delta}")
    if noise.size != state.size:
        raise InvalidInputError(f"Noise has {noise.size} particles, state has {state.size}")
    if spec.include_lions_term and noise.cross_iterated is None:
        raise InvalidInputError("The Lions term needs cross iterated integrals in the noise block")

    target = state.step_index + 1
    y = state.positions
    mu = state.measure
    delta = grid.delta

    drift = np.asarray(model.drift(y, mu), dtype=np.float64)
    _ensure_finite(drift, target, math.inf)
    sigma = np.asarray(model.diffusion(y, mu), dtype=np.float64)
    _ensure_finite(sigma, target, math.inf)

    new = y + tame_drift(drift, delta, spec.taming) * delta + sigma * noise.increments

    if spec.include_state_gradient_term:
        gradient = np.asarray(model.diffusion_state_gradient(y, mu), dtype=np.float64)
        new = new + gradient * sigma * noise.diagonal_iterated

    if spec.include_lions_term and noise.cross_iterated is not None:
        lions = np.asarray(
            model.diffusion_lions_derivative(y[:, None], mu, y[None, :]), dtype=np.float64
        )
        # row i: sum_j D^L sigma(Y_i)(Y_j) sigma(Y_j) I(j, i)
        summands = lions * sigma[None, :] * noise.cross_iterated.T
        new = new + sequential_sum(summands) / state.size

    _ensure_finite(new, target, divergence_threshold)
    return EnsembleState(new, target, grid)


StateObserver = Callable[[EnsembleState], None]


def _levy_for(spec: SchemeSpec, grid: TimeGrid, levy: LevyAreaConfig | None) -> LevyAreaConfig | None:
    if not spec.include_lions_term:
        return None
    return levy or LevyAreaConfig.for_steps(grid.steps)


def simulate_terminal(
    model: McKeanVlasovModel,
    spec: SchemeSpec,
    grid: TimeGrid,
    N: int,
    seed: int,
    levy: LevyAreaConfig | None = None,
    particle_offset: int = 0,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
    observer: StateObserver | None = None,
) -> EnsembleState:
    """Run the scheme to the final node, keeping only the current slice.

    Args:
        model: Coefficients.
        spec: Scheme.
        grid: Time grid.
        N: Number of particles.
        seed: Base seed of the Brownian streams.
        levy: Levy-area truncation (default ceil(sqrt(M)) when the Lions term is on).
        particle_offset: Index of the first particle's Brownian stream.
        divergence_threshold: Any |Y| above this aborts the run.
        observer: Called with every slice, the initial one included.

    Returns:
        The terminal slice.
    """
    levy_config = _levy_for(spec, grid, levy)
    state = EnsembleState.initial(model, grid, N)
    if observer is not None:
        observer(state)
    for n in range(grid.steps):
        noise = sample_noise_block(seed, n, N, grid.delta, levy_config, particle_offset)
        state = step_ensemble(state, model, spec, noise, divergence_threshold)
        if observer is not None:
            observer(state)
    return state


def simulate_path(
    model: McKeanVlasovModel,
    spec: SchemeSpec,
    grid: TimeGrid,
    N: int,
    seed: int,
    levy: LevyAreaConfig | None = None,
    particle_offset: int = 0,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> list[EnsembleState]:
    """Run the scheme and return the slices at all M + 1 nodes."""
    trajectory: list[EnsembleState] = []
    simulate_terminal(
        model,
        spec,
        grid,
        N,
        seed,
        levy=levy,
        particle_offset=particle_offset,
        divergence_threshold=divergence_threshold,
        observer=trajectory.append,
    )
    return trajectory


def simulate_coupled_pair(
    model: McKeanVlasovModel,
    spec: SchemeSpec,
    grid_fine: TimeGrid,
    N: int,
    seed: int,
    levy: LevyAreaConfig | None = None,
    particle_offset: int = 0,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> tuple[EnsembleState, EnsembleState]:
    """Run the fine grid and its coarsening on one Brownian path.

    Fine noise is sampled; every coarse block is obtained by chaining the two
    fine blocks it covers.

    Returns:
        (fine_terminal, coarse_terminal).
    """
    grid_coarse = grid_fine.coarsened()
    levy_config = _levy_for(spec, grid_fine, levy)
    fine = EnsembleState.initial(model, grid_fine, N)
    coarse = EnsembleState.initial(model, grid_coarse, N)
    delta = grid_fine.delta

    for m in range(grid_coarse.steps):
        first = sample_noise_block(seed, 2 * m, N, delta, levy_config, particle_offset)
        second = sample_noise_block(seed, 2 * m + 1, N, delta, levy_config, particle_offset)
        fine = step_ensemble(fine, model, spec, first, divergence_threshold)
        fine = step_ensemble(fine, model, spec, second, divergence_threshold)
        coarse = step_ensemble(
            coarse, model, spec, coarsen_iterated((first, second)), divergence_threshold
        )
    return fine, coarse
