"""
Tab separated plot data. Each file starts with one commented header line naming the
columns and their units, followed by one row per record. Floats are written with 17
significant digits, so identical inputs give byte-identical files.
"""

import math
from collections.abc import Iterable, Sequence
from logging import getLogger
from pathlib import Path

from tslim.constants import SIGNIFICANT_DIGITS
from tslim.core import SpeedLimitReport
from tslim.errors import ValidationError
from tslim.typedefs import Row

logger = getLogger(__name__)

REPORT_COLUMNS: list[tuple[str, str]] = [
    ("t", "time"),
    ("w2_sq", "weight^2"),
    ("entropy", "loss"),
    ("t_sl", "time"),
    ("inefficiency", "1"),
    ("l_gamma", "weight"),
    ("l_geo", "weight"),
]


def column_header(columns: Sequence[tuple[str, str]]) -> list[str]:
    return [f"{name} [{unit}]" for name, unit in columns]


def format_value(value: str | int | float | None) -> str:
    match value:
        case None:
            return "nan"
        case bool():
            return str(int(value))
        case int():
            return str(value)
        case float():
            if math.isnan(value):
                return "nan"
            return f"{value:.{SIGNIFICANT_DIGITS}g}"
        case _:
            return str(value)


def report_row(report: SpeedLimitReport) -> Row:
    return [
        report.horizon_t,
        report.w2_sq,
        report.entropy,
        report.t_sl,
        report.inefficiency,
        report.path_length,
        report.geo_length,
    ]


def write_tsv(path: Path | str, header: Sequence[str], rows: Iterable[Row]) -> Path:
    path = Path(path)
    lines = ["# " + "\t".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValidationError(
                f"{path.name}: row has {len(row)} values, header has {len(header)}"
            )
        lines.append("\t".join(format_value(value) for value in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.debug(f"{path}: {len(lines) - 1} rows")
    return path


def emit_plot_data(reports: Sequence[SpeedLimitReport], path: Path | str) -> Path:
    """One row per report with the columns t, w2_sq, entropy, t_sl, inefficiency,
    l_gamma and l_geo. Undefined values are written as nan."""
    if not reports:
        raise ValidationError("reports: nothing to write")
    return write_tsv(
        path,
        column_header(REPORT_COLUMNS),
        (report_row(report) for report in reports),
    )
