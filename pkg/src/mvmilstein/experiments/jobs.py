"""Seed derivation and the deterministic job runner shared by all experiments."""

import concurrent.futures
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Generic, TypeVar

import numpy as np

from mvmilstein.exceptions import SimulationDivergedError

logger = logging.getLogger(__name__)

J = TypeVar("J")
R = TypeVar("R")

_SEED_MASK = (1 << 64) - 1


def derive_seed(base: int, *indices: int) -> int:
    """Seed of the job addressed by ``indices`` (e.g. level and repetition).

    The indices are hashed through ``numpy.random.SeedSequence`` and XOR-ed
    into the base seed, so a job's seed never depends on the order in which
    jobs are scheduled.
    """
    mix = np.random.SeedSequence(list(indices)).generate_state(1, np.uint64)[0]
    return (base ^ int(mix)) & _SEED_MASK


@dataclass(frozen=True)
class JobOutcome(Generic[R]):
    """Value of a job, or the divergence that stopped it."""

    value: R | None = None
    diverged: SimulationDivergedError | None = None

    @property
    def ok(self) -> bool:
        """True when the job finished without diverging."""
        return self.diverged is None


def _guarded(fn: Callable[[J], R], job: J) -> JobOutcome[R]:
    try:
        return JobOutcome(value=fn(job))
    except SimulationDivergedError as e:
        logger.debug(f"Job {job!r} diverged: {e}")
        return JobOutcome(diverged=e)


def run_jobs(fn: Callable[[J], R], jobs: Sequence[J], workers: int = 1) -> list[JobOutcome[R]]:
    """Run independent jobs and return their outcomes in job order.

    Divergence is captured per job; any other exception propagates. Results
    are identical for every worker count because each job is a pure function
    of its own arguments and the reduction happens in index order.

    Args:
        fn: The job body.
        jobs: Job arguments.
        workers: Thread count; 1 runs inline.

    Returns:
        One outcome per job, aligned with ``jobs``.
    """
    if workers <= 1 or len(jobs) <= 1:
        return [_guarded(fn, job) for job in jobs]

    results: dict[int, JobOutcome[R]] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(_guarded, fn, job): idx for idx, job in enumerate(jobs)}
        for future in concurrent.futures.as_completed(futures):
            results[futures[future]] = future.result()
    return [results[idx] for idx in sorted(results)]
