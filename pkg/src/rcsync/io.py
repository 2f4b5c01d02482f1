"""CSV writers for run artifacts (comma separated, LF, 17 significant digits)."""

from __future__ import annotations

import csv
import math

from .experiments import RECORD_COLUMNS, SUMMARY_COLUMNS, record_row


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".17g")
    if isinstance(v, (tuple, list)):
        return ";".join(fmt(x) for x in v)
    return str(v)


def write_rows(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            out.writerow([fmt(row[c]) for c in columns])


def write_records(path, records) -> None:
    write_rows(path, RECORD_COLUMNS, [record_row(r) for r in records])


def write_summary(path, rows) -> None:
    write_rows(path, SUMMARY_COLUMNS, rows)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
