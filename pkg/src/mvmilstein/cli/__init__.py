"""Command-line front end."""

from mvmilstein.cli.commands import run_command
from mvmilstein.cli.output import emit_results
from mvmilstein.cli.parsing import parse_config

__all__ = ["emit_results", "parse_config", "run_command"]
