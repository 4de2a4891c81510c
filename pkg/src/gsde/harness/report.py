"""CSV and JSON report writers.

Floats are written with 17 significant digits and no other run-dependent
content (no timestamps, no host names), so identical configurations give
byte-identical files.  JSON has no infinity, so non-finite values become
``null``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .experiments import (
    ESTIMATOR_NOTE,
    REFERENCE_NOTE,
    SLOPE_BAND,
    ConvergenceReport,
    IncrementReport,
    MomentReport,
)

CONVERGE_HEADER = ("q", "mse_empirical", "stderr", "bound", "ratio")
MOMENTS_HEADER = ("statistic", "value", "K", "pass")
INCREMENTS_HEADER = ("r", "t", "empirical", "bound", "pass")
PATHS_HEADER = ("path_id", "scenario", "t", "W", "QV")
BOUNDS_HEADER = ("q", "bound")


class ReportError(OSError):
    pass


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


def to_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return f"{obj:.17g}" if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k))}: {_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_json(doc) -> str:
    return _json(doc) + "\n"


def csv_rows(report):
    """``(header, rows)`` of the CSV view of a report."""
    if isinstance(report, ConvergenceReport):
        return CONVERGE_HEADER, [
            (r.q, r.mse_empirical, r.stderr, r.bound, r.ratio) for r in report.rows
        ]
    if isinstance(report, MomentReport):
        return MOMENTS_HEADER, report.rows()
    if isinstance(report, IncrementReport):
        return INCREMENTS_HEADER, [
            (r.r, r.t, r.empirical, r.bound, r.passed) for r in report.rows
        ]
    if isinstance(report, list):
        # rows already in the paths layout
        return PATHS_HEADER, report
    if isinstance(report, dict) and report.get("experiment") == "bounds":
        return BOUNDS_HEADER, [(r["q"], r["bound"]) for r in report.get("table", [])]
    raise TypeError(f"no CSV layout for {type(report).__name__}")


def json_doc(report) -> dict:
    if isinstance(report, ConvergenceReport):
        return {
            "experiment": "converge",
            "config": report.config,
            "notes": [REFERENCE_NOTE, ESTIMATOR_NOTE],
            "rows": [
                {"q": r.q, "mse_empirical": r.mse_empirical, "stderr": r.stderr,
                 "bound": r.bound, "ratio": r.ratio}
                for r in report.rows
            ],
            "slope": report.slope,
            "slope_checked": report.slope_checked,
            "slope_band": list(SLOPE_BAND),
            "slope_ok": report.slope_ok,
            "pass": report.passed,
        }
    if isinstance(report, MomentReport):
        return {
            "experiment": "moments",
            "config": report.config,
            "notes": [ESTIMATOR_NOTE],
            "rows": [
                {"statistic": s, "value": v, "K": k, "pass": ok}
                for s, v, k, ok in report.rows()
            ],
            "stderr_sup_moment": report.stderr_sup_moment,
            "stderr_sup_of_moments": report.stderr_sup_of_moments,
            "argmax_time": report.argmax_time,
            "pass": report.passed,
        }
    if isinstance(report, IncrementReport):
        return {
            "experiment": "increments",
            "config": report.config,
            "notes": [ESTIMATOR_NOTE],
            "H1": report.H1,
            "rows": [
                {"r": r.r, "t": r.t, "empirical": r.empirical, "stderr": r.stderr,
                 "bound": r.bound, "pass": r.passed}
                for r in report.rows
            ],
            "pass": report.passed,
        }
    if isinstance(report, list):
        return {
            "experiment": "paths",
            "rows": [dict(zip(PATHS_HEADER, row)) for row in report],
        }
    if isinstance(report, dict):
        return report
    raise TypeError(f"no JSON layout for {type(report).__name__}")


def _write(path, text: str):
    try:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit(report, format: str, path: str | Path) -> Path:
    """Write ``report`` as ``csv`` or ``json`` to ``path``."""
    if format == "csv":
        header, rows = csv_rows(report)
        _write(path, to_csv(header, rows))
    elif format == "json":
        _write(path, to_json(json_doc(report)))
    else:
        raise ValueError(f"unknown format {format!r}")
    return Path(path)
