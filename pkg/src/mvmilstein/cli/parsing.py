"""Command-line and config-file parsing into an :class:`ExperimentConfig`.

Values are layered: Settings defaults, then the config file, then flags.
Every failure is reported as a :class:`ConfigError` naming the offending key.
"""

import argparse
import logging
import re
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NoReturn

from pydantic import ValidationError

from mvmilstein.config import Settings, get_settings
from mvmilstein.exceptions import ConfigError
from mvmilstein.models.experiment import ExperimentConfig, OutputFormat, Subcommand
from mvmilstein.sde.model import BuiltinName, TamingVariant
from mvmilstein.sde.schemes import SchemeKind

logger = logging.getLogger(__name__)

RANGE_PATTERN = re.compile(r"^\s*(\d+)\s*\.\.\s*(\d+)\s*$")

# Step count and particle exponents of each subcommand when none are given.
COMMAND_STEPS = {
    Subcommand.SIMULATE: 256,
    Subcommand.CONVERGENCE: 256,
    Subcommand.LDERIV_DECAY: 16,
    Subcommand.POC: 64,
    Subcommand.VALIDATE: 256,
}
COMMAND_PARTICLE_LEVELS = {
    Subcommand.LDERIV_DECAY: (2, 3, 4, 5, 6),
    Subcommand.POC: (3, 4, 5, 6, 7),
}

# Keys a subcommand never reads; passing one as a flag is a usage error.
_MODEL_KEYS = frozenset({"model", "scheme", "taming", "lions", "gradient", "sigma", "coupling_c", "levy_terms"})
UNUSED_KEYS: dict[Subcommand, frozenset[str]] = {
    Subcommand.SIMULATE: frozenset({"levels", "particle_levels", "reps"}),
    Subcommand.CONVERGENCE: frozenset({"steps", "particle_levels"}),
    Subcommand.LDERIV_DECAY: frozenset({"levels", "particles"}),
    Subcommand.POC: frozenset({"levels", "particles"}),
    Subcommand.VALIDATE: _MODEL_KEYS | {"levels", "particle_levels", "reps"},
}


class UsageArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to one exit code."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError("argv", message)


def parse_range(text: str, key: str) -> tuple[int, ...]:
    """Parse ``a..b`` (inclusive) or a comma-separated list of integers.

    Raises:
        ConfigError: If the text is malformed or the range is empty.
    """
    match = RANGE_PATTERN.match(text)
    if match:
        start, stop = int(match.group(1)), int(match.group(2))
        if stop < start:
            raise ConfigError(key, f"empty range {text!r}")
        return tuple(range(start, stop + 1))
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise ConfigError(key, f"expected a..b or a comma-separated list, got {text!r}") from e


def parse_switch(text: str, key: str) -> bool:
    """Parse ``on``/``off`` (also true/false, yes/no, 1/0)."""
    value = text.strip().lower()
    if value in ("on", "true", "yes", "1"):
        return True
    if value in ("off", "false", "no", "0"):
        return False
    raise ConfigError(key, f"expected on or off, got {text!r}")


def _enum(cls: type[Any]) -> Callable[[str, str], Any]:
    def convert(text: str, key: str) -> Any:
        try:
            return cls(text.strip().lower())
        except ValueError as e:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(key, f"unknown value {text!r}; expected one of {choices}") from e

    return convert


def _number(kind: type[int] | type[float]) -> Callable[[str, str], Any]:
    def convert(text: str, key: str) -> Any:
        try:
            return kind(text.strip())
        except ValueError as e:
            raise ConfigError(key, f"expected a {kind.__name__}, got {text!r}") from e

    return convert


def _path(text: str, _key: str) -> Path:
    return Path(text.strip())


# config key -> (ExperimentConfig field, converter)
KEYS: dict[str, tuple[str, Callable[[str, str], Any]]] = {
    "model": ("model", _enum(BuiltinName)),
    "scheme": ("scheme", _enum(SchemeKind)),
    "taming": ("taming", _enum(TamingVariant)),
    "lions": ("lions", parse_switch),
    "gradient": ("gradient", parse_switch),
    "steps": ("steps", _number(int)),
    "levels": ("levels", parse_range),
    "particles": ("particles", _number(int)),
    "particle_levels": ("particle_levels", parse_range),
    "reps": ("repetitions", _number(int)),
    "seed": ("seed", _number(int)),
    "horizon": ("horizon", _number(float)),
    "sigma": ("sigma", _number(float)),
    "coupling_c": ("coupling_c", _number(float)),
    "x0": ("x0", _number(float)),
    "levy_terms": ("levy_terms", _number(int)),
    "out": ("out", _path),
    "format": ("output_format", _enum(OutputFormat)),
    "workers": ("workers", _number(int)),
}


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_file(path: Path) -> dict[str, str]:
    """Read a flat ``key = value`` file (UTF-8, ``#`` starts a comment).

    Raises:
        ConfigError: If the file cannot be read, a line is malformed or a key is unknown.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from e

    entries: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}", f"expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _normalize_key(key)
        if key not in KEYS:
            raise ConfigError(key, "unknown configuration key")
        entries[key] = value
    return entries


def build_parser() -> UsageArgumentParser:
    """Build the ``mvmilstein`` argument parser with one subparser per experiment."""
    common = UsageArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="key = value file")
    common.add_argument("--model", default=argparse.SUPPRESS, help="ex1 .. ex5")
    common.add_argument("--scheme", default=argparse.SUPPRESS, help="tamed-euler | milstein")
    common.add_argument("--taming", default=argparse.SUPPRESS, help="none | s1 | s2")
    common.add_argument("--lions", default=argparse.SUPPRESS, help="on | off")
    common.add_argument("--gradient", default=argparse.SUPPRESS, help="on | off")
    common.add_argument("--steps", default=argparse.SUPPRESS, help="number of time steps M")
    common.add_argument("--levels", default=argparse.SUPPRESS, help="time levels a..b")
    common.add_argument("--particles", default=argparse.SUPPRESS, help="number of particles N")
    common.add_argument(
        "--particle-levels", default=argparse.SUPPRESS, help="particle exponents a..b"
    )
    common.add_argument("--reps", default=argparse.SUPPRESS, help="repetitions R")
    common.add_argument("--seed", default=argparse.SUPPRESS, help="base seed")
    common.add_argument("--horizon", default=argparse.SUPPRESS, help="final time T")
    common.add_argument("--sigma", default=argparse.SUPPRESS, help="drift constant sigma")
    common.add_argument("--coupling-c", default=argparse.SUPPRESS, help="weight c of the mean")
    common.add_argument("--x0", default=argparse.SUPPRESS, help="initial value")
    common.add_argument("--levy-terms", default=argparse.SUPPRESS, help="Levy-area terms K")
    common.add_argument("--out", default=argparse.SUPPRESS, help="result file (default stdout)")
    common.add_argument("--format", default=argparse.SUPPRESS, help="csv | json")
    common.add_argument("--workers", default=argparse.SUPPRESS, help="worker threads")

    parser = UsageArgumentParser(
        prog="mvmilstein",
        description="Tamed Milstein and Euler schemes for McKean-Vlasov particle systems",
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=UsageArgumentParser)
    for command in Subcommand:
        subparsers.add_parser(command.value, parents=[common])
    return parser


def _settings_defaults(settings: Settings, command: Subcommand) -> dict[str, Any]:
    values: dict[str, Any] = {
        "command": command,
        "horizon": settings.horizon,
        "sigma": settings.sigma,
        "coupling_c": settings.coupling_c,
        "x0": settings.x0,
        "steps": COMMAND_STEPS[command],
        "particles": settings.particles,
        "repetitions": settings.repetitions,
        "seed": settings.seed,
        "levy_terms": settings.levy_terms,
        "output_format": OutputFormat(settings.output_format),
        "workers": settings.effective_workers,
        "divergence_threshold": settings.divergence_threshold,
    }
    if command in COMMAND_PARTICLE_LEVELS:
        values["particle_levels"] = COMMAND_PARTICLE_LEVELS[command]
    return values


def _convert(entries: dict[str, str]) -> dict[str, Any]:
    converted: dict[str, Any] = {}
    for key, raw in entries.items():
        field, convert = KEYS[key]
        converted[field] = convert(raw, key)
    return converted


def _field_to_key(field: str) -> str:
    for key, (name, _) in KEYS.items():
        if name == field:
            return key
    return field


def parse_config(argv: Sequence[str] | None = None, settings: Settings | None = None) -> ExperimentConfig:
    """Parse command-line arguments (and an optional config file) into a validated config.

    Args:
        argv: Arguments without the program name; defaults to ``sys.argv[1:]``.
        settings: Defaults; uses get_settings() when omitted.

    Returns:
        The effective configuration.

    Raises:
        ConfigError: On any usage error, naming the offending key.
    """
    settings = settings or get_settings()
    namespace = vars(build_parser().parse_args(argv))
    command_name = namespace.pop("command", None)
    if command_name is None:
        raise ConfigError("command", f"expected one of {', '.join(c.value for c in Subcommand)}")
    command = Subcommand(command_name)

    config_path = namespace.pop("config", None)
    file_entries = read_config_file(config_path) if config_path is not None else {}
    flag_entries = {_normalize_key(k): str(v) for k, v in namespace.items()}
    unused = sorted(UNUSED_KEYS[command] & flag_entries.keys())
    if unused:
        key = unused[0]
        raise ConfigError(key, f"--{key.replace('_', '-')} is not used by {command.value}")
    ignored = sorted(UNUSED_KEYS[command] & file_entries.keys())
    if ignored:
        logger.info(f"Config file keys not used by {command.value}: {', '.join(ignored)}")
        file_entries = {k: v for k, v in file_entries.items() if k not in UNUSED_KEYS[command]}

    values = _settings_defaults(settings, command)
    values.update(_convert(file_entries))
    values.update(_convert(flag_entries))

    model = values.get("model")
    if model is None and command is not Subcommand.VALIDATE:
        raise ConfigError("model", "a model is required (--model ex1 .. ex5)")
    if model is BuiltinName.EX3 and "particles" not in file_entries and "particles" not in flag_entries:
        values["particles"] = settings.particles_small_model
    if values.get("scheme") is SchemeKind.TAMED_EULER:
        for key in ("lions", "gradient"):
            if values.get(key):
                raise ConfigError(key, "tamed-euler cannot include Milstein terms")

    if command is Subcommand.VALIDATE:
        if values["steps"] % 2:
            raise ConfigError("steps", "validate compares M with M/2 steps, so M must be even")
        if values["particles"] < 2:
            raise ConfigError("particles", "validate needs at least two particles")

    try:
        config = ExperimentConfig(**values)
    except ValidationError as e:
        first = e.errors()[0]
        field = str(first["loc"][0]) if first["loc"] else "config"
        raise ConfigError(_field_to_key(field), first["msg"]) from e

    logger.debug(f"Effective configuration: {config.echo()}")
    return config
