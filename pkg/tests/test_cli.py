from __future__ import annotations

import json

import pytest

from weighted_semigroup.cli import main


def write_config(tmp_path, text: str):
    path = tmp_path / "run.yaml"
    path.write_text(text)
    return str(path)


def test_verify_weights_polynomial(tmp_path):
    cfg = write_config(tmp_path, "weight: {kind: polynomial, alpha: 2}\n")
    out = tmp_path / "out"
    assert main(["verify-weights", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert [r["check_name"] for r in doc["reports"]] == ["weights", "lemma"]
    rows = doc["reports"][0]["measured"]["weights"]
    poly = [r for r in rows if r["weight"] == "polynomial(alpha=2)"]
    assert poly and all(r["sup_ratio"] <= 2.0 for r in poly)


def test_broken_ellipticity_exits_2_without_output(tmp_path, capsys):
    cfg = write_config(tmp_path, "coefficients:\n  name: trigonometric\n"
                                 "  params: {base: 1.0, amplitude: 2.0}\n")
    out = tmp_path / "out"
    assert main(["run-suite", "--config", cfg, "--out", str(out), "--checks", "lemma"]) == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "grid: {n: 10}\nweight: {kind: exponential, alpha: 1}\n")
    assert main(["run-suite", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "grid.n" in err and "weight.alpha" in err


def test_missing_config_and_usage_errors(tmp_path):
    assert main(["run-suite", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_report_regenerates_identical_csv(tmp_path):
    out = tmp_path / "run"
    assert main(["verify-weights", "--out", str(out), "--seed", "3"]) == 0
    again = tmp_path / "again"
    assert main(["report", str(out / "report.json"), "--out", str(again)]) == 0
    assert (again / "table.csv").read_bytes() == (out / "table.csv").read_bytes()


def test_seed_override_and_determinism(tmp_path):
    # the output path is part of the recorded config, so reruns share one directory
    runs, out = [], tmp_path / "run"
    for seed in ("1", "1", "2"):
        assert main(["run-suite", "--out", str(out), "--seed", seed,
                     "--checks", "lemma,l2_contraction"]) == 0
        runs.append((out / "report.json").read_bytes())
    assert runs[0] == runs[1]
    assert runs[0] != runs[2]
    assert json.loads(runs[2])["config"]["ensemble"]["seed"] == 2


def test_unknown_check_in_flag(tmp_path, capsys):
    assert main(["run-suite", "--out", str(tmp_path / "o"), "--checks", "lemma,bogus"]) == 2
    assert "bogus" in capsys.readouterr().err


@pytest.mark.slow
def test_full_suite_passes(tmp_path):
    assert main(["run-suite", "--out", str(tmp_path / "full"), "--refine"]) == 0
