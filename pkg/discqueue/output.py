"""
output.py
Module for output management: renders result tables as CSV or JSON with a
metadata header and writes them to a file or returns them for standard output.
"""
import csv
import io
import json
import logging
from typing import Any, Dict, List, Optional, Sequence

from .errors import ParameterDomainError

logger = logging.getLogger(__name__)

Row = Dict[str, Any]


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _meta_value(value: Any) -> str:
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(value, separators=(",", ":"))
    if value is None:
        return "null"
    return _cell(value)


def render_csv(meta: Dict[str, Any], rows: List[Row], columns: Sequence[str]) -> str:
    """``# key: value`` metadata lines, then a header row and one line per row."""
    buffer = io.StringIO()
    for key, value in meta.items():
        buffer.write(f"# {key}: {_meta_value(value)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(column, "")) for column in columns])
    return buffer.getvalue()


def render_json(meta: Dict[str, Any], rows: List[Row], columns: Sequence[str]) -> str:
    """{"meta": {...}, "rows": [...]} with rows restricted to the given columns."""
    payload = {"meta": meta, "rows": [{column: row.get(column) for column in columns} for row in rows]}
    return json.dumps(payload, indent=2) + "\n"


def render(meta: Dict[str, Any], rows: List[Row], columns: Sequence[str], fmt: str = "csv") -> str:
    if fmt == "csv":
        return render_csv(meta, rows, columns)
    if fmt == "json":
        return render_json(meta, rows, columns)
    raise ParameterDomainError(f"unknown output format {fmt!r}")


def write_output(text: str, output_path: Optional[str] = None) -> Optional[str]:
    """
    Write rendered text to output_path, or hand it back when no path is given.

    Returns:
        The text when it is meant for standard output, otherwise None
    """
    if output_path is None:
        return text
    with open(output_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info("Output saved to %s", output_path)
    return None
