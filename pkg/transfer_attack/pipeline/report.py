"""
Report emission: CSV for downstream plotting, markdown (Jinja2 template)
for reading. Rates are always printed with one decimal place.
"""

import io
import os
import csv
import logging

from jinja2 import Environment, FileSystemLoader

from ..errors import ConfigurationError
from .evaluation import TransferReport
from .sweep import SweepResult

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("csv", "markdown")
CSV_HEADER = ["surrogate", "target", "success_rate", "n", "white_box"]
SWEEP_HEADER = ["parameter", "value", "target", "success_rate"]

_templates_dir = os.path.join(os.path.dirname(__file__), "templates")
_env = Environment(loader=FileSystemLoader(_templates_dir),
                   trim_blocks=True, lstrip_blocks=True, keep_trailing_newline=True)


def format_rate(rate: float) -> str:
    return f"{rate:.1f}"


def _csv_text(header: list[str], rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def emit_report(report: TransferReport, fmt: str = "csv") -> str:
    fmt = fmt.lower()
    if fmt == "csv":
        return _csv_text(CSV_HEADER, (
            [s, t, format_rate(rate), n, "true" if wb else "false"]
            for s, t, rate, n, wb in report.cells()
        ))
    if fmt in ("markdown", "md"):
        rows = []
        for i, surrogate in enumerate(report.surrogates):
            rows.append({
                "surrogate": surrogate,
                "cells": [
                    {"target": t, "rate": format_rate(report.rates[i][j]),
                     "n": report.counts[i][j], "white_box": report.white_box[i][j]}
                    for j, t in enumerate(report.targets)
                ],
            })
        method = report.metadata.get("config", {}).get("method", "")
        return _env.get_template("transfer_report.md.j2").render(
            report=report, rows=rows, method=method)
    raise ConfigurationError(f"Unknown report format '{fmt}' (expected one of {REPORT_FORMATS})")


def emit_sweep(result: SweepResult) -> str:
    return _csv_text(SWEEP_HEADER, (
        [result.parameter, f"{value:g}", target, format_rate(result.rates[i][j])]
        for i, value in enumerate(result.grid)
        for j, target in enumerate(result.targets)
    ))


def write_text(text: str, path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        f.write(text)
    logger.info(f"Wrote {path}")
