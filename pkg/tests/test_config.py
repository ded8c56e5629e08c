from __future__ import annotations

import json

import pytest

from weighted_semigroup.config import RunConfig, config_from_dict, parse_config
from weighted_semigroup.errors import ConfigError
from weighted_semigroup.estimates import CHECKS
from weighted_semigroup.weights import Weight


def errors_of(data) -> list[str]:
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    return info.value.errors


def test_empty_mapping_gives_defaults():
    assert config_from_dict({}) == RunConfig()
    assert config_from_dict(None) == RunConfig()
    assert RunConfig().checks == CHECKS


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("")
    assert parse_config(path) == RunConfig()


def test_yaml_and_json_agree(tmp_path):
    doc = {"grid": {"n": 128}, "weight": {"kind": "polynomial", "alpha": -1},
           "checks": ["weights"]}
    (tmp_path / "a.json").write_text(json.dumps(doc))
    (tmp_path / "a.yaml").write_text("grid: {n: 128}\nweight:\n  kind: polynomial\n  alpha: -1\n"
                                    "checks: [weights]\n")
    a, b = parse_config(tmp_path / "a.json"), parse_config(tmp_path / "a.yaml")
    assert a == b
    assert a.weight == Weight.polynomial(-1.0) and a.n == 128


def test_round_trip_through_dict():
    cfg = config_from_dict({"weight": {"kind": "exponential", "lambda": 0.5}, "k": 2,
                            "time": {"scheme": "implicit_euler"}})
    assert config_from_dict(cfg.to_dict()) == cfg


def test_wrong_weight_key_names_the_key():
    errs = errors_of({"weight": {"kind": "exponential", "alpha": 1.0}})
    assert any(e.startswith("weight.alpha:") and "weight.lambda" in e for e in errs)


def test_small_and_odd_n():
    assert any(e.startswith("grid.n:") and ">= 16" in e for e in errors_of({"grid": {"n": 10}}))
    assert any(e.startswith("grid.n:") and "even" in e for e in errors_of({"grid": {"n": 65}}))


def test_all_errors_are_collected():
    errs = errors_of({"grid": {"n": 10, "L": -1}, "k": 7, "time": {"scheme": "rk4"},
                      "ensemble": {"count": 4}, "bogus": 1})
    paths = {e.split(":")[0] for e in errs}
    assert {"grid.n", "grid.L", "k", "time.scheme", "ensemble.count", "bogus"} <= paths


@pytest.mark.parametrize("data, path", [
    ({"grid": {"size": 3}}, "grid.size"),
    ({"coefficients": {"name": "nope"}}, "coefficients.name"),
    ({"coefficients": {"name": "trigonometric", "params": {"c": 1}}}, "coefficients.params.c"),
    ({"weight": {"kind": "polynomial"}}, "weight.alpha"),
    ({"weight": {"kind": "cubic"}}, "weight.kind"),
    ({"t_grid": [0.5, 0.1]}, "t_grid"),
    ({"t_grid": []}, "t_grid"),
    ({"checks": ["weights", "nope"]}, "checks[1]"),
    ({"ensemble": {"max_mode": 100}}, "ensemble.max_mode"),
    ({"refine": "yes"}, "refine"),
    ({"schema_version": 2}, "schema_version"),
    ({"k": True}, "k"),
    ({"time": {"dt": 0.05}, "checks": ["smoothing"]}, "time.dt"),
    ({"grid": {"L": 2.0, "n": 64}, "checks": ["kernel"]}, "grid.L"),
], ids=lambda v: v if isinstance(v, str) else "")
def test_single_error_paths(data, path):
    assert any(e.startswith(path + ":") for e in errors_of(data))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config(tmp_path / "absent.yaml")
    assert "not found" in info.value.errors[0]


def test_unparseable_file(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("grid: [unclosed\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_overrides_revalidate():
    cfg = RunConfig().with_overrides(seed=5, checks=["lemma"], refine=True, output="x")
    assert (cfg.seed, cfg.checks, cfg.refine, cfg.output) == (5, ("lemma",), True, "x")
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(seed=-1)


def test_shipped_default_config_matches_defaults():
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"
    assert parse_config(path) == RunConfig()
