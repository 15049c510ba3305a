"""Exception hierarchy for mvmilstein."""


class MvMilsteinError(Exception):
    """Base exception for mvmilstein errors."""


class InvalidInputError(MvMilsteinError, ValueError):
    """A precondition on an argument was violated."""


class SimulationDivergedError(MvMilsteinError):
    """A particle left the finite range during time stepping."""

    def __init__(self, step_index: int, particle: int, value: float) -> None:
        """Initialize the error.

        Args:
            step_index: Index of the step whose output diverged.
            particle: Index of the first offending particle.
            value: The offending value (non-finite or above the threshold).
        """
        self.step_index = step_index
        self.particle = particle
        self.value = value
        super().__init__(
            f"Simulation diverged at step {step_index}, particle {particle} (value={value!r})"
        )


class ConfigError(MvMilsteinError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, key: str, message: str) -> None:
        self.key = key
        super().__init__(f"{key}: {message}")


class OutputError(MvMilsteinError):
    """A result file could not be written."""
