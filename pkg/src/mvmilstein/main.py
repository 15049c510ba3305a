"""Console entry point for mvmilstein."""

import logging
import sys
from collections.abc import Sequence
from enum import IntEnum

from mvmilstein import __version__
from mvmilstein.cli.commands import run_command
from mvmilstein.cli.output import emit_results
from mvmilstein.cli.parsing import parse_config
from mvmilstein.config import Settings, get_settings
from mvmilstein.exceptions import ConfigError, InvalidInputError, OutputError, SimulationDivergedError

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    """Process exit codes."""

    OK = 0
    USAGE = 1
    IO = 2
    PARTIAL = 3


def configure_logging(settings: Settings) -> None:
    """Send log records to stderr so result data on stdout stays clean."""
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(settings.log_level)


def main(argv: Sequence[str] | None = None, settings: Settings | None = None) -> int:
    """Parse, run and write one experiment.

    Args:
        argv: Arguments without the program name.
        settings: Defaults; uses get_settings() when omitted.

    Returns:
        The exit code: 0 success, 1 usage error, 2 I/O error, 3 partial result.
    """
    settings = settings or get_settings()
    configure_logging(settings)

    try:
        config = parse_config(argv, settings)
        logger.info(f"Starting {settings.app_name} v{__version__}: {config.command.value}")
        result = run_command(config)
        emit_results(result, config.output_format, config.out)
    except (ConfigError, InvalidInputError) as e:
        logger.error(f"Usage error: {e}")
        return ExitCode.USAGE
    except OutputError as e:
        logger.error(str(e))
        return ExitCode.IO
    except SimulationDivergedError as e:
        logger.error(f"Unrecorded divergence, no result written: {e}")
        return ExitCode.PARTIAL

    if result.partial:
        logger.warning("Experiment recorded a divergence; the written result is partial")
        return ExitCode.PARTIAL
    return ExitCode.OK


def run() -> None:
    """Run the CLI and exit with its status."""
    sys.exit(main())


if __name__ == "__main__":
    run()
