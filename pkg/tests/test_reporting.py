from __future__ import annotations

import csv
import io
import json
import math

from weighted_semigroup.config import RunConfig
from weighted_semigroup.estimates import EstimateReport, check_lemma
from weighted_semigroup.reporting import (CSV_HEADER, dumps, load_reports, render_csv,
                                          report_document, sanitize, write_outputs)

import numpy as np


def sample_report(verdict="pass") -> EstimateReport:
    rep = EstimateReport("demo", {"k": 1}, {"x": math.nan, "y": np.float64(2.5)}, verdict)
    rep.add_row("ratio", 0.1, t=0.5)
    rep.add_row("count", 3)
    return rep


def test_sanitize_replaces_non_finite():
    out = sanitize({"a": [math.inf, np.float32(1.5), np.int64(2)], "b": np.array([1.0, math.nan])})
    assert out == {"a": [None, 1.5, 2], "b": [1.0, None]}
    json.dumps(out, allow_nan=False)


def test_overall_verdict():
    assert report_document([sample_report(), sample_report()])["overall"] == "pass"
    assert report_document([sample_report(), sample_report("fail")])["overall"] == "fail"


def test_csv_rows_match_table():
    doc = report_document([sample_report()], RunConfig().to_dict())
    rows = list(csv.reader(io.StringIO(render_csv(doc))))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1] == ["demo", "0.5", "ratio", "0.1"]
    assert rows[2] == ["demo", "", "count", "3"]


def test_write_and_reload(tmp_path):
    reps = [check_lemma(pairs=200, step=1.0)]
    doc = report_document(reps, RunConfig().to_dict())
    paths = write_outputs(doc, tmp_path / "out")
    assert set(paths) == {"report", "table", "meta"}
    assert json.loads(paths["meta"].read_text())["timestamp"]
    assert load_reports(paths["report"]) == [EstimateReport.from_dict(r) for r in doc["reports"]]
    assert paths["report"].read_text() == dumps(doc)


def test_report_is_timestamp_free(tmp_path):
    doc = report_document([sample_report()], RunConfig().to_dict())
    a = write_outputs(doc, tmp_path / "a")["report"].read_bytes()
    b = write_outputs(doc, tmp_path / "b", timestamp=False)["report"].read_bytes()
    assert a == b
    assert b"timestamp" not in a
