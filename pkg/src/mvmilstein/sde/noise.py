"""Seed-addressable Brownian increments, iterated Ito integrals and level coarsening.

Random draws come from the counter-based Philox generator. The Philox key
encodes ``(seed, step, stream)`` and the counter encodes the particle (and,
for bridge coefficients, the series index), so a draw is a pure function of
its :class:`StreamKey`. Particle ``p`` therefore sees the same Brownian path
whatever the ensemble size, the particle offset or the number of workers.

Cross-particle iterated integrals use the truncated Brownian-bridge series
of Kloeden, Platen and Wright: with ``X_k, Y_k`` standard normal per particle,

    A(j, i) = delta / (2 pi) * sum_k (X_jk Y'_ik - Y'_jk X_ik) / k,
    Y' = Y + sqrt(2 / delta) dW,
    I(j, i) = dW_j dW_i / 2 + A(j, i).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import overload

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from mvmilstein.exceptions import InvalidInputError
from mvmilstein.sde.measure import FloatArray

_TWO_POW_MINUS_53 = 2.0**-53
_SEED_LIMIT = 2**64


class NoiseChannel(int, Enum):
    """Independent families of draws for one (seed, step, particle)."""

    INCREMENT = 0
    BRIDGE_X = 1
    BRIDGE_Y = 2


# Both bridge families share one Philox stream (cosine and sine halves of a
# Box-Muller pair), so the stream tag only distinguishes increments from bridges.
_STREAM_TAG = {
    NoiseChannel.INCREMENT: 0,
    NoiseChannel.BRIDGE_X: 1,
    NoiseChannel.BRIDGE_Y: 1,
}


@dataclass(frozen=True)
class StreamKey:
    """Address of one standard normal draw."""

    seed: int
    particle: int
    step: int
    channel: NoiseChannel = NoiseChannel.INCREMENT
    k: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.seed < _SEED_LIMIT:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.particle < 0 or self.step < 0:
            raise InvalidInputError("particle and step indices must be non-negative")
        if self.channel is NoiseChannel.INCREMENT and self.k != 0:
            raise InvalidInputError("increment draws have no series index")
        if self.channel is not NoiseChannel.INCREMENT and self.k < 1:
            raise InvalidInputError("bridge coefficients are indexed from k = 1")


class LevyAreaConfig(BaseModel):
    """Truncation of the Levy-area series."""

    model_config = ConfigDict(frozen=True)

    truncation_terms: int = Field(..., ge=1, description="Number K of bridge coefficients")

    @classmethod
    def for_steps(cls, steps: int) -> "LevyAreaConfig":
        """Default truncation K = ceil(sqrt(M)) for a grid of M steps."""
        if steps < 1:
            raise InvalidInputError(f"steps must be positive, got {steps}")
        return cls(truncation_terms=math.isqrt(steps - 1) + 1)


@dataclass(frozen=True, eq=False)
class NoiseBlock:
    """Noise driving all particles over one time step.

    ``cross_iterated[j, i]`` holds I(j, i), the integral of (W^j - W^j_tn) dW^i
    over the step. Its diagonal carries the same values as
    ``diagonal_iterated`` so that a scheme can use the full matrix directly.
    """

    delta: float
    increments: FloatArray = field(repr=False)
    diagonal_iterated: FloatArray = field(repr=False)
    cross_iterated: FloatArray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not math.isfinite(self.delta) or self.delta <= 0:
            raise InvalidInputError(f"delta must be positive and finite, got {self.delta!r}")
        n = np.shape(self.increments)
        if len(n) != 1 or np.shape(self.diagonal_iterated) != n:
            raise InvalidInputError("increments and diagonal_iterated must be equal-length vectors")
        for name in ("increments", "diagonal_iterated"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.cross_iterated is not None:
            cross = np.array(self.cross_iterated, dtype=np.float64)
            if cross.shape != (n[0], n[0]):
                raise InvalidInputError(
                    f"cross_iterated must have shape {(n[0], n[0])}, got {cross.shape}"
                )
            cross.flags.writeable = False
            object.__setattr__(self, "cross_iterated", cross)

    @property
    def size(self) -> int:
        """Number of particles N."""
        return int(self.increments.size)


def _check_delta(delta: float) -> None:
    if not math.isfinite(delta) or delta <= 0:
        raise InvalidInputError(f"delta must be positive and finite, got {delta!r}")


def _philox_key(seed: int, step: int, stream: int) -> int:
    if not 0 <= seed < _SEED_LIMIT:
        raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if step < 0:
        raise InvalidInputError(f"step index must be non-negative, got {step}")
    return seed | ((step * 4 + stream) << 64)


def _philox_blocks(key: int, counter: int, n_blocks: int) -> NDArray[np.uint64]:
    """Return Philox output blocks for counters counter+1 .. counter+n_blocks."""
    bit_generator = np.random.Philox(key=key, counter=counter)
    return bit_generator.random_raw(4 * n_blocks).reshape(n_blocks, 4)


def _box_muller(blocks: NDArray[np.uint64]) -> tuple[FloatArray, FloatArray]:
    u1 = ((blocks[..., 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_POW_MINUS_53
    u2 = (blocks[..., 1] >> np.uint64(11)).astype(np.float64) * _TWO_POW_MINUS_53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    return radius * np.cos(angle), radius * np.sin(angle)


def _increment_normals(seed: int, step: int, offset: int, n: int) -> FloatArray:
    key = _philox_key(seed, step, _STREAM_TAG[NoiseChannel.INCREMENT])
    z, _ = _box_muller(_philox_blocks(key, offset, n))
    return z


def _bridge_normals(
    seed: int, step: int, offset: int, n: int, terms: int
) -> tuple[FloatArray, FloatArray]:
    key = _philox_key(seed, step, _STREAM_TAG[NoiseChannel.BRIDGE_X])
    blocks = np.stack([_philox_blocks(key, (offset + p) << 64, terms) for p in range(n)])
    return _box_muller(blocks)


def standard_normal(key: StreamKey) -> float:
    """Return the standard normal draw addressed by ``key``."""
    if key.channel is NoiseChannel.INCREMENT:
        return float(_increment_normals(key.seed, key.step, key.particle, 1)[0])
    x, y = _bridge_normals(key.seed, key.step, key.particle, 1, key.k)
    values = x if key.channel is NoiseChannel.BRIDGE_X else y
    return float(values[0, key.k - 1])


def sample_increments(
    seed: int, step_index: int, N: int, delta: float, particle_offset: int = 0
) -> FloatArray:
    """Sample Brownian increments Normal(0, delta) for particles offset .. offset+N-1.

    Raises:
        InvalidInputError: If N is not positive or delta is not positive.
    """
    if N <= 0:
        raise InvalidInputError(f"N must be positive, got {N}")
    _check_delta(delta)
    return math.sqrt(delta) * _increment_normals(seed, step_index, particle_offset, N)


@overload
def diagonal_iterated(increment: float, delta: float) -> float: ...


@overload
def diagonal_iterated(increment: FloatArray, delta: float) -> FloatArray: ...


def diagonal_iterated(increment: float | FloatArray, delta: float) -> float | FloatArray:
    """Return the same-particle iterated integral (dW^2 - delta) / 2."""
    _check_delta(delta)
    return (increment * increment - delta) / 2.0


def levy_area(
    seed: int,
    step_index: int,
    increments: FloatArray,
    delta: float,
    config: LevyAreaConfig,
    particle_offset: int = 0,
) -> FloatArray:
    """Sample the truncated Levy-area matrix A for one step.

    A is antisymmetric by construction: it is formed as S - S^T.
    """
    _check_delta(delta)
    dw = np.asarray(increments, dtype=np.float64)
    n = dw.size
    terms = config.truncation_terms
    x, y = _bridge_normals(seed, step_index, particle_offset, n, terms)
    y_shifted = y + math.sqrt(2.0 / delta) * dw[:, None]

    s = np.zeros((n, n))
    for k in range(terms):
        s += np.outer(x[:, k], y_shifted[:, k]) / float(k + 1)
    return (delta / (2.0 * math.pi)) * (s - s.T)


def sample_cross_iterated(
    seed: int,
    step_index: int,
    increments: FloatArray,
    delta: float,
    config: LevyAreaConfig,
    particle_offset: int = 0,
) -> FloatArray:
    """Sample I(j, i) for all particle pairs of one step.

    Off-diagonal entries are dW_j dW_i / 2 + A(j, i), so I(i, j) + I(j, i)
    equals dW_i dW_j up to rounding. The diagonal holds (dW_i^2 - delta) / 2.
    """
    dw = np.asarray(increments, dtype=np.float64)
    area = levy_area(seed, step_index, dw, delta, config, particle_offset)
    cross = 0.5 * np.outer(dw, dw) + area
    np.fill_diagonal(cross, diagonal_iterated(dw, delta))
    return cross


def sample_noise_block(
    seed: int,
    step_index: int,
    N: int,
    delta: float,
    levy: LevyAreaConfig | None = None,
    particle_offset: int = 0,
) -> NoiseBlock:
    """Sample the full noise block of one step.

    Args:
        seed: Base seed of the run.
        step_index: Index of the step on the sampled (finest) grid.
        N: Number of particles.
        delta: Step size.
        levy: Levy-area truncation; cross integrals are only sampled when given.
        particle_offset: Index of the first particle's Brownian stream.
    """
    dw = sample_increments(seed, step_index, N, delta, particle_offset)
    cross = None
    if levy is not None:
        cross = sample_cross_iterated(seed, step_index, dw, delta, levy, particle_offset)
    return NoiseBlock(
        delta=delta,
        increments=dw,
        diagonal_iterated=diagonal_iterated(dw, delta),
        cross_iterated=cross,
    )


def zero_noise_block(N: int, delta: float, with_cross: bool = False) -> NoiseBlock:
    """Noise block with all increments zero (deterministic test driver)."""
    dw = np.zeros(N)
    cross = None
    if with_cross:
        cross = np.zeros((N, N))
        np.fill_diagonal(cross, -delta / 2.0)
    return NoiseBlock(
        delta=delta,
        increments=dw,
        diagonal_iterated=diagonal_iterated(dw, delta),
        cross_iterated=cross,
    )


def coarsen_increments(
    fine_a: float | FloatArray, fine_b: float | FloatArray
) -> float | FloatArray:
    """Increment over two consecutive fine steps."""
    return fine_a + fine_b


def coarsen_iterated(fine_blocks: tuple[NoiseBlock, NoiseBlock]) -> NoiseBlock:
    """Chain two consecutive fine blocks into one coarse block of step 2 delta.

    Cross entries follow I_c(j, i) = I_1(j, i) + I_2(j, i) + dW_1^j dW_2^i.
    The diagonal is evaluated in closed form from the coarse increments, which
    equals the chained value algebraically and keeps (dW^2 - delta) / 2 exact.

    Raises:
        InvalidInputError: If the blocks differ in step size, size or cross presence.
    """
    first, second = fine_blocks
    if first.delta != second.delta:
        raise InvalidInputError(f"Step sizes differ: {first.delta} vs {second.delta}")
    if first.size != second.size:
        raise InvalidInputError(f"Particle counts differ: {first.size} vs {second.size}")
    if (first.cross_iterated is None) != (second.cross_iterated is None):
        raise InvalidInputError("Both blocks must carry cross iterated integrals, or neither")

    delta = 2.0 * first.delta
    dw = np.asarray(coarsen_increments(first.increments, second.increments), dtype=np.float64)
    diagonal = diagonal_iterated(dw, delta)

    cross = None
    if first.cross_iterated is not None and second.cross_iterated is not None:
        cross = (
            first.cross_iterated
            + second.cross_iterated
            + np.outer(first.increments, second.increments)
        )
        np.fill_diagonal(cross, diagonal)

    return NoiseBlock(
        delta=delta,
        increments=dw,
        diagonal_iterated=diagonal,
        cross_iterated=cross,
    )
