"""Serialization of result tables to CSV and JSON."""

import csv
import io
import logging
import sys
from pathlib import Path

from mvmilstein.exceptions import OutputError
from mvmilstein.models.experiment import OutputFormat
from mvmilstein.models.results import CellValue, ResultTable

logger = logging.getLogger(__name__)


def format_cell(value: CellValue) -> str:
    """Render one cell; floats carry 17 significant digits so they round-trip exactly."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def metadata_line(result: ResultTable) -> str:
    """Trailing ``#key=value,...`` row: summary values first, then the echoed config."""
    items = [f"{key}={format_cell(value)}" for key, value in result.trailer().items()]
    items.extend(f"{key}={value}" for key, value in result.config.items())
    return "#" + ",".join(items)


def render_csv(result: ResultTable) -> str:
    """Header, one line per row, then the metadata row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(result.header())
    for row in result.rows():
        writer.writerow([format_cell(cell) for cell in row])
    buffer.write(metadata_line(result) + "\n")
    return buffer.getvalue()


def render_json(result: ResultTable) -> str:
    """JSON document with the same fields as the Python result."""
    return result.model_dump_json(by_alias=True, indent=2) + "\n"


def emit_results(result: ResultTable, output_format: OutputFormat, path: Path | None) -> None:
    """Write a result table to ``path`` (stdout when None).

    Args:
        result: Any result table.
        output_format: CSV or JSON.
        path: Destination file.

    Raises:
        OutputError: If the file cannot be written.
    """
    text = render_csv(result) if output_format is OutputFormat.CSV else render_json(result)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as e:
        raise OutputError(f"Cannot write results to {path}: {e}") from e
    logger.info(f"Wrote {output_format.value} results to {path}")
