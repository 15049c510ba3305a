"""Empirical measures over a particle slice and their integration functionals.

All reductions over samples run left to right in particle order
(``numpy.cumsum``), never pairwise, so a statistic is bit-identical across
runs and worker counts.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mvmilstein.exceptions import InvalidInputError

FloatArray = NDArray[np.float64]


def sequential_sum(values: ArrayLike) -> FloatArray:
    """Sum along the last axis strictly left to right.

    Args:
        values: Array whose last axis is reduced.

    Returns:
        The reduced array (a 0-d array for 1-D input).
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape[-1] == 0:
        return np.zeros(arr.shape[:-1])
    return np.cumsum(arr, axis=-1)[..., -1]


def saturating(u: ArrayLike) -> FloatArray:
    """Return u / (1 + u^2), the bounded map behind the variance-driven diffusion."""
    x = np.asarray(u, dtype=np.float64)
    return x / (1.0 + x * x)


def saturating_prime(u: ArrayLike) -> FloatArray:
    """Derivative (1 - u^2) / (1 + u^2)^2 of :func:`saturating`."""
    x = np.asarray(u, dtype=np.float64)
    denom = 1.0 + x * x
    return (1.0 - x * x) / (denom * denom)


@dataclass(frozen=True)
class MeasureStats:
    """Sufficient statistics shared by the built-in models."""

    mean: float
    second_moment: float
    mean_sin: float
    mean_cos: float
    mean_g: float
    mean_g2: float


@dataclass(frozen=True, eq=False)
class EmpiricalMeasureView:
    """Read-only view of one time slice of all particle states.

    The measure is the uniform Dirac mixture (1/N) sum_j delta_{x_j}.
    """

    samples: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise InvalidInputError("Empirical measure needs at least one sample")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def size(self) -> int:
        """Number of atoms N."""
        return int(self.samples.size)

    @cached_property
    def stats(self) -> MeasureStats:
        """Statistics computed once per view, in particle order."""
        x = self.samples
        n = float(x.size)
        g = saturating(x)
        return MeasureStats(
            mean=float(sequential_sum(x)) / n,
            second_moment=float(sequential_sum(x * x)) / n,
            mean_sin=float(sequential_sum(np.sin(x))) / n,
            mean_cos=float(sequential_sum(np.cos(x))) / n,
            mean_g=float(sequential_sum(g)) / n,
            mean_g2=float(sequential_sum(g * g)) / n,
        )

    @classmethod
    def of(cls, samples: ArrayLike) -> "EmpiricalMeasureView":
        """Build a view from any array-like of positions."""
        return cls(np.asarray(samples, dtype=np.float64))


def _finite_values(values: ArrayLike, what: str) -> FloatArray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} produced non-finite values")
    return arr


def mean(view: EmpiricalMeasureView) -> float:
    """Return the empirical mean (1/N) sum_j x_j."""
    return view.stats.mean


def integrate(view: EmpiricalMeasureView, f: Callable[[FloatArray], ArrayLike]) -> float:
    """Integrate f against the empirical measure.

    Args:
        view: The measure.
        f: Vectorised integrand, evaluated once on all samples.

    Returns:
        (1/N) sum_j f(x_j).

    Raises:
        InvalidInputError: If f is non-finite on a sample.
    """
    values = np.broadcast_to(_finite_values(f(view.samples), "integrand"), view.samples.shape)
    return float(sequential_sum(values)) / view.size


def double_integrate(
    view: EmpiricalMeasureView, g: Callable[[FloatArray, FloatArray], ArrayLike]
) -> float:
    """Integrate g against the product measure, by direct O(N^2) evaluation.

    Returns:
        (1/N^2) sum_i sum_j g(x_i, x_j).
    """
    x = view.samples
    grid = np.broadcast_to(
        _finite_values(g(x[:, None], x[None, :]), "integrand"), (x.size, x.size)
    )
    return float(sequential_sum(sequential_sum(grid))) / (view.size * view.size)


def double_integrate_factored(
    view: EmpiricalMeasureView,
    terms: Sequence[tuple[Callable[[FloatArray], ArrayLike], Callable[[FloatArray], ArrayLike]]],
) -> float:
    """Integrate a separable g(u, v) = sum_k f_k(u) h_k(v) in O(N).

    Args:
        view: The measure.
        terms: Pairs (f_k, h_k) whose products sum to g.

    Returns:
        sum_k (integral of f_k) * (integral of h_k).
    """
    total = 0.0
    for f, h in terms:
        total += integrate(view, f) * integrate(view, h)
    return total


def variance_of(view: EmpiricalMeasureView, g: Callable[[FloatArray], ArrayLike]) -> float:
    """Return the (biased) variance of g under the empirical measure.

    Rounding that pushes the value below zero is clamped to 0 so that
    exp(-variance) stays well defined.
    """
    values = np.broadcast_to(_finite_values(g(view.samples), "integrand"), view.samples.shape)
    n = float(view.size)
    first = float(sequential_sum(values)) / n
    second = float(sequential_sum(values * values)) / n
    return max(second - first * first, 0.0)


def wasserstein2_1d(view_a: EmpiricalMeasureView, view_b: EmpiricalMeasureView) -> float:
    """Exact W2 distance between two equal-size one-dimensional empirical measures.

    The optimal coupling in one dimension matches order statistics, so the
    distance is the root mean square gap between the sorted samples.

    Raises:
        InvalidInputError: If the sample counts differ.
    """
    if view_a.size != view_b.size:
        raise InvalidInputError(
            f"wasserstein2_1d needs equal sample counts, got {view_a.size} and {view_b.size}"
        )
    a = np.sort(view_a.samples, kind="stable")
    b = np.sort(view_b.samples, kind="stable")
    gap = a - b
    return float(np.sqrt(float(sequential_sum(gap * gap)) / view_a.size))
