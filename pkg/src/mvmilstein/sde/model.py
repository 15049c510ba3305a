"""McKean-Vlasov model interface, drift taming and the built-in benchmark models.

Coefficients are vectorised: they take an array of states (any shape) plus an
:class:`EmpiricalMeasureView` and return an array broadcast against the
states. The Lions derivative additionally takes an array of probe points and
broadcasts states against probes, so ``(N, 1)`` states with ``(1, N)``
probes give the full ``(N, N)`` interaction matrix.
"""

import itertools
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import overload

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mvmilstein.exceptions import InvalidInputError
from mvmilstein.sde.measure import (
    EmpiricalMeasureView,
    FloatArray,
    saturating,
    saturating_prime,
)

logger = logging.getLogger(__name__)

Coefficient = Callable[[FloatArray, EmpiricalMeasureView], FloatArray]
LionsCoefficient = Callable[[FloatArray, EmpiricalMeasureView, FloatArray], FloatArray]


class TamingVariant(str, Enum):
    """Drift taming applied by a scheme."""

    NONE = "none"
    SCHEME1 = "s1"
    SCHEME2 = "s2"


class BuiltinName(str, Enum):
    """Identifiers of the built-in benchmark models."""

    EX1 = "ex1"
    EX2 = "ex2"
    EX3 = "ex3"
    EX4 = "ex4"
    EX5 = "ex5"


BUILTIN_NAMES: tuple[str, ...] = tuple(name.value for name in BuiltinName)


class BuiltinModelParams(BaseModel):
    """Parameters shared by the built-in models."""

    model_config = ConfigDict(frozen=True)

    sigma_param: float = Field(default=1.5, gt=0, description="Linear drift constant sigma")
    c: float = Field(default=0.5, description="Weight of the mean in the drift")
    x0: float = Field(default=1.0, description="Deterministic initial value")


@dataclass(frozen=True)
class McKeanVlasovModel:
    """Coefficients of a scalar McKean-Vlasov SDE.

    dX = drift(X, mu) dt + diffusion(X, mu) dW, with the state gradient and the
    Lions derivative of the diffusion supplied explicitly.
    """

    name: str
    drift: Coefficient
    diffusion: Coefficient
    diffusion_state_gradient: Coefficient
    diffusion_lions_derivative: LionsCoefficient
    initial_value: float = 1.0


@overload
def tame_drift(b_value: float, delta: float, variant: TamingVariant) -> float: ...


@overload
def tame_drift(b_value: FloatArray, delta: float, variant: TamingVariant) -> FloatArray: ...


def tame_drift(
    b_value: float | FloatArray, delta: float, variant: TamingVariant
) -> float | FloatArray:
    """Tame a drift value for a step of size delta.

    Scheme 1 returns b / (1 + delta |b|), Scheme 2 returns b / (1 + delta |b|^2),
    and no taming returns b unchanged.

    Args:
        b_value: Drift value(s).
        delta: Step size, strictly positive.
        variant: Which taming to apply.

    Returns:
        The tamed drift, a float for scalar input.

    Raises:
        InvalidInputError: If any input is non-finite or delta is not positive.
    """
    if not math.isfinite(delta) or delta <= 0:
        raise InvalidInputError(f"delta must be positive and finite, got {delta!r}")
    b = np.asarray(b_value, dtype=np.float64)
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("drift value must be finite")

    if variant is TamingVariant.NONE:
        tamed = b
    elif variant is TamingVariant.SCHEME1:
        tamed = b / (1.0 + delta * np.abs(b))
    else:
        tamed = b / (1.0 + delta * b * b)

    if tamed.ndim == 0:
        return float(tamed)
    return tamed


def _filled(x: FloatArray, value: float) -> FloatArray:
    return np.full(np.shape(x), value, dtype=np.float64)


def _cubic(x: FloatArray, sigma_param: float) -> FloatArray:
    return 0.5 * sigma_param * sigma_param * x - x * x * x


def _sin_convolution(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
    # integral of sin(x - y) mu(dy) = sin x E[cos] - cos x E[sin]
    s = measure.stats
    return np.sin(x) * s.mean_cos - np.cos(x) * s.mean_sin


def _cos_convolution(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
    # integral of cos(x - y) mu(dy) = cos x E[cos] + sin x E[sin]
    s = measure.stats
    return np.cos(x) * s.mean_cos + np.sin(x) * s.mean_sin


def _saturating_variance(measure: EmpiricalMeasureView) -> float:
    s = measure.stats
    return max(s.mean_g2 - s.mean_g * s.mean_g, 0.0)


def _zero_gradient(x: FloatArray, _measure: EmpiricalMeasureView) -> FloatArray:
    return np.zeros(np.shape(x))


def _zero_lions(x: FloatArray, _measure: EmpiricalMeasureView, probe: FloatArray) -> FloatArray:
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(probe)))


def make_builtin(which: BuiltinName, params: BuiltinModelParams) -> McKeanVlasovModel:
    """Build one of the five benchmark models.

    Args:
        which: The model identifier.
        params: sigma, c and X0.

    Returns:
        The model with closed-form state gradient and Lions derivative.
    """
    sig = params.sigma_param
    c = params.c

    def mean_drift(weight: float) -> Coefficient:
        def drift(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
            return _cubic(np.asarray(x, dtype=np.float64), sig) + weight * measure.stats.mean

        return drift

    if which is BuiltinName.EX1:

        def ex1_diffusion(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
            return _filled(x, measure.stats.mean)

        def ex1_lions(x: FloatArray, _measure: EmpiricalMeasureView, probe: FloatArray) -> FloatArray:
            return np.ones(np.broadcast_shapes(np.shape(x), np.shape(probe)))

        return McKeanVlasovModel(
            name=which.value,
            drift=mean_drift(c),
            diffusion=ex1_diffusion,
            diffusion_state_gradient=_zero_gradient,
            diffusion_lions_derivative=ex1_lions,
            initial_value=params.x0,
        )

    if which is BuiltinName.EX2:

        def ex2_diffusion(x: FloatArray, _measure: EmpiricalMeasureView) -> FloatArray:
            return np.array(x, dtype=np.float64, copy=True)

        def ex2_gradient(x: FloatArray, _measure: EmpiricalMeasureView) -> FloatArray:
            return np.ones(np.shape(x))

        return McKeanVlasovModel(
            name=which.value,
            drift=mean_drift(c),
            diffusion=ex2_diffusion,
            diffusion_state_gradient=ex2_gradient,
            diffusion_lions_derivative=_zero_lions,
            initial_value=params.x0,
        )

    if which is BuiltinName.EX3:

        def ex3_drift(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
            x = np.asarray(x, dtype=np.float64)
            return _cubic(x, sig) + _sin_convolution(x, measure)

        def ex3_diffusion(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
            x = np.asarray(x, dtype=np.float64)
            return x + _sin_convolution(x, measure)

        def ex3_gradient(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
            return 1.0 + _cos_convolution(np.asarray(x, dtype=np.float64), measure)

        def ex3_lions(x: FloatArray, _measure: EmpiricalMeasureView, probe: FloatArray) -> FloatArray:
            return -np.cos(np.asarray(x, dtype=np.float64) - np.asarray(probe, dtype=np.float64))

        return McKeanVlasovModel(
            name=which.value,
            drift=ex3_drift,
            diffusion=ex3_diffusion,
            diffusion_state_gradient=ex3_gradient,
            diffusion_lions_derivative=ex3_lions,
            initial_value=params.x0,
        )

    if which is BuiltinName.EX4:

        def ex4_diffusion(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
            # double integral of sin(u + v) factors as 2 E[sin] E[cos]
            s = measure.stats
            return _filled(x, 2.0 * s.mean_sin * s.mean_cos)

        def ex4_lions(x: FloatArray, measure: EmpiricalMeasureView, probe: FloatArray) -> FloatArray:
            s = measure.stats
            y = np.asarray(probe, dtype=np.float64)
            value = 2.0 * (np.cos(y) * s.mean_cos - np.sin(y) * s.mean_sin)
            return np.broadcast_to(value, np.broadcast_shapes(np.shape(x), y.shape)).copy()

        return McKeanVlasovModel(
            name=which.value,
            drift=mean_drift(1.0),
            diffusion=ex4_diffusion,
            diffusion_state_gradient=_zero_gradient,
            diffusion_lions_derivative=ex4_lions,
            initial_value=params.x0,
        )

    def ex5_diffusion(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
        return _filled(x, math.exp(-_saturating_variance(measure)))

    def ex5_lions(x: FloatArray, measure: EmpiricalMeasureView, probe: FloatArray) -> FloatArray:
        y = np.asarray(probe, dtype=np.float64)
        scale = math.exp(-_saturating_variance(measure))
        gy = saturating(y)
        gpy = saturating_prime(y)
        value = scale * (-2.0 * gy * gpy + 2.0 * gpy * measure.stats.mean_g)
        return np.broadcast_to(value, np.broadcast_shapes(np.shape(x), y.shape)).copy()

    return McKeanVlasovModel(
        name=which.value,
        drift=mean_drift(1.0),
        diffusion=ex5_diffusion,
        diffusion_state_gradient=_zero_gradient,
        diffusion_lions_derivative=ex5_lions,
        initial_value=params.x0,
    )


def builtin_from_name(name: str, params: BuiltinModelParams | None = None) -> McKeanVlasovModel:
    """Resolve a built-in model by its identifier (``ex1`` .. ``ex5``).

    Raises:
        InvalidInputError: If the name is unknown.
    """
    try:
        which = BuiltinName(name.lower())
    except ValueError as e:
        raise InvalidInputError(
            f"Unknown model {name!r}; expected one of {', '.join(BUILTIN_NAMES)}"
        ) from e
    return make_builtin(which, params or BuiltinModelParams())


def linear_meanfield_model(a: float, c: float, s: float, x0: float) -> McKeanVlasovModel:
    """Mean-field Ornstein-Uhlenbeck model dX = (a X + c E[X]) dt + s dW.

    Its mean solves m' = (a + c) m, which makes it a closed-form oracle.
    """
    for label, value in (("a", a), ("c", c), ("s", s), ("x0", x0)):
        if not math.isfinite(value):
            raise InvalidInputError(f"{label} must be finite, got {value!r}")

    def drift(x: FloatArray, measure: EmpiricalMeasureView) -> FloatArray:
        return a * np.asarray(x, dtype=np.float64) + c * measure.stats.mean

    def diffusion(x: FloatArray, _measure: EmpiricalMeasureView) -> FloatArray:
        return _filled(x, s)

    return McKeanVlasovModel(
        name=f"ou(a={a:g},c={c:g},s={s:g})",
        drift=drift,
        diffusion=diffusion,
        diffusion_state_gradient=_zero_gradient,
        diffusion_lions_derivative=_zero_lions,
        initial_value=x0,
    )


class PairDiagnostic(BaseModel):
    """Empirical Lipschitz ratios for one pair of states under one measure."""

    x: float
    y: float
    measure_index: int = Field(..., ge=0)
    one_sided_ratio: float = Field(..., description="<x-y, b(x)-b(y)> / |x-y|^2")
    lipschitz_ratio: float = Field(..., ge=0, description="|sigma(x)-sigma(y)| / |x-y|")
    violation: bool = False


class AssumptionReport(BaseModel):
    """Result of numerically probing the drift and diffusion growth conditions."""

    model_name: str
    tolerance: float
    pairs: list[PairDiagnostic] = Field(default_factory=list)
    skipped_pairs: int = 0

    @property
    def violations(self) -> list[PairDiagnostic]:
        """Pairs whose ratios exceed the tolerance."""
        return [p for p in self.pairs if p.violation]

    @property
    def max_one_sided_ratio(self) -> float:
        """Largest one-sided Lipschitz ratio observed."""
        return max((p.one_sided_ratio for p in self.pairs), default=0.0)

    @property
    def max_lipschitz_ratio(self) -> float:
        """Largest diffusion Lipschitz ratio observed."""
        return max((p.lipschitz_ratio for p in self.pairs), default=0.0)


def probe_assumptions(
    model: McKeanVlasovModel,
    sample_states: Sequence[float],
    sample_measures: Sequence[EmpiricalMeasureView],
    tolerance: float,
) -> AssumptionReport:
    """Spot-check the one-sided Lipschitz drift and Lipschitz diffusion conditions.

    Every unordered pair of distinct states is evaluated under every measure.
    A pair is flagged when either ratio exceeds ``tolerance``.

    Args:
        model: The model to probe.
        sample_states: At least two states.
        sample_measures: At least one measure.
        tolerance: The admissible constant for both ratios.

    Returns:
        The per-pair report.

    Raises:
        InvalidInputError: If there are fewer than two states or no measures.
    """
    if len(sample_states) < 2:
        raise InvalidInputError("probe_assumptions needs at least two states")
    if not sample_measures:
        raise InvalidInputError("probe_assumptions needs at least one measure")

    report = AssumptionReport(model_name=model.name, tolerance=tolerance)
    for index, measure in enumerate(sample_measures):
        for x, y in itertools.combinations(sample_states, 2):
            gap = float(x) - float(y)
            if gap == 0.0:
                report.skipped_pairs += 1
                continue
            pts = np.array([x, y], dtype=np.float64)
            b = model.drift(pts, measure)
            sig = model.diffusion(pts, measure)
            one_sided = gap * float(b[0] - b[1]) / (gap * gap)
            lipschitz = abs(float(sig[0] - sig[1])) / abs(gap)
            report.pairs.append(
                PairDiagnostic(
                    x=float(x),
                    y=float(y),
                    measure_index=index,
                    one_sided_ratio=one_sided,
                    lipschitz_ratio=lipschitz,
                    violation=one_sided > tolerance or lipschitz > tolerance,
                )
            )

    if report.violations:
        logger.warning(
            f"{model.name}: {len(report.violations)} of {len(report.pairs)} pairs exceed {tolerance}"
        )
    return report
