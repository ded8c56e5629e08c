"""
JSON run reports and their CSV view.

``report.json`` is canonical and byte-reproducible: keys are sorted, floats
use their shortest round-trip form and non-finite numbers become ``null``.
The wall-clock timestamp goes to ``meta.json`` so it never perturbs the
report. ``table.csv`` has one row per ``(check, t, statistic)`` and can be
regenerated from ``report.json`` alone.
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .estimates import EstimateReport, code_version

REPORT_NAME = "report.json"
TABLE_NAME = "table.csv"
META_NAME = "meta.json"
CSV_HEADER = ("check", "t", "statistic", "value")


def sanitize(obj):
    """Plain JSON types; NaN and infinities become ``None``."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def report_document(reports: list[EstimateReport], config: dict | None = None) -> dict:
    verdicts = [r.verdict for r in reports]
    return sanitize({
        "config": config,
        "code_version": code_version(),
        "overall": "pass" if all(v == "pass" for v in verdicts) else "fail",
        "reports": [r.to_dict() for r in reports],
    })


def dumps(document: dict) -> str:
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"


def table_rows(document: dict) -> list[tuple]:
    rows = []
    for rep in document["reports"]:
        for row in rep["table"]:
            rows.append(tuple(row[key] for key in CSV_HEADER))
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(document: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in table_rows(document):
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_outputs(document: dict, out_dir, timestamp: bool = True) -> dict[str, Path]:
    """Write ``report.json``, ``table.csv`` and (optionally) ``meta.json`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / REPORT_NAME, "table": out / TABLE_NAME}
    paths["report"].write_text(dumps(document))
    paths["table"].write_text(render_csv(document))
    if timestamp:
        paths["meta"] = out / META_NAME
        meta = {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "code_version": code_version()}
        paths["meta"].write_text(dumps(meta))
    return paths


def load_document(path) -> dict:
    return json.loads(Path(path).read_text())


def load_reports(path) -> list[EstimateReport]:
    return [EstimateReport.from_dict(r) for r in load_document(path)["reports"]]
