"""
CSV and JSON emission for curves, DOS tables and verification reports.

CSV: header row, comma separated, LF line endings, UTF-8, floats with 17
significant digits. JSON: one object {"config": {...}, "results": [...]} with
lower_snake_case keys and non-finite floats written as null.
"""

import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import OUTPUT_FORMATS, SIGNIFICANT_DIGITS

logger = logging.getLogger(__name__)


def format_number(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def _csv_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_number(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ";".join(_csv_cell(v) for v in value)
    if value is None:
        return ""
    return str(value)


def json_safe(value: Any) -> Any:
    """Plain JSON types: numpy scalars unwrapped, tuples as lists, complex as [re, im], non-finite as None."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [json_safe(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return [json_safe(value.real), json_safe(value.imag)]
    return value


def render_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(column)) for column in columns])
    return buffer.getvalue()


def render_json(rows: Sequence[Dict[str, Any]], config_record: Dict[str, Any]) -> str:
    document = {"config": json_safe(config_record), "results": json_safe(list(rows))}
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def write_output(
    rows: Sequence[Dict[str, Any]],
    columns: Sequence[str],
    fmt: str,
    config_record: Dict[str, Any],
    output_path: Optional[str] = None,
) -> None:
    """Render rows in fmt and write them to output_path, or stdout when no path is given."""
    if fmt not in OUTPUT_FORMATS:
        raise ValueError(f"unknown output format {fmt!r}, expected one of {OUTPUT_FORMATS}")
    text = render_csv(rows, columns) if fmt == "csv" else render_json(rows, config_record)
    if output_path:
        path = Path(output_path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"Wrote {len(rows)} rows to {path} ({fmt})")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


# ===========================
# Row builders
# ===========================

REPORT_COLUMNS = ("name", "passed", "max_abs_residual", "tolerance", "measured", "expected", "notes")


def report_rows(reports: Sequence[Any], record_timings: bool = False) -> List[Dict[str, Any]]:
    """One row per CheckReport; runtime only when record_timings is set."""
    rows = []
    for report in reports:
        row = {
            "name": report.name,
            "passed": report.passed,
            "max_abs_residual": report.max_abs_residual,
            "tolerance": report.tolerance,
            "measured": list(report.measured),
            "expected": list(report.expected),
            "notes": list(report.notes),
            "inputs": report.inputs,
        }
        if record_timings:
            row["runtime_seconds"] = report.runtime_seconds
        rows.append(row)
    return rows


def report_columns(record_timings: bool = False) -> List[str]:
    return list(REPORT_COLUMNS) + (["runtime_seconds"] if record_timings else [])
