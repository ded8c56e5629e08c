"""
Run configuration: a versioned YAML (or JSON) document validated up front.

Every problem in a config file is collected, with its key path, before
:class:`~weighted_semigroup.errors.ConfigError` is raised, so a broken file
never starts a computation. A minimal valid file is ``{}``; the defaults
are those of :class:`RunConfig`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .elliptic import CATALOG
from .errors import ConfigError
from .estimates import CHECKS, KERNEL_TIMES, SMOOTHING_T_MAX
from .semigroup import SCHEMES
from .weights import Weight

SCHEMA_VERSION = 1
MAX_K = 2
MIN_COUNT = 16

_FIELD_PARAMS = {
    "identity": {},
    "scaled_identity": {"c"},
    "trigonometric": {"base", "amplitude"},
    "anisotropic": {},
}
_WEIGHT_PARAM = {"unit": None, "polynomial": "alpha", "exponential": "lambda"}
_SECTIONS = {
    "schema_version": None,
    "grid": {"dim", "L", "n"},
    "coefficients": {"name", "params"},
    "weight": {"kind", "alpha", "lambda"},
    "time": {"scheme", "dt"},
    "k": None,
    "t_grid": None,
    "ensemble": {"seed", "count", "max_mode", "decay"},
    "checks": None,
    "output": None,
    "refine": None,
}


@dataclass(frozen=True)
class RunConfig:
    dim: int = 1
    L: float = 8.0
    n: int = 256
    coefficients: str = "trigonometric"
    coefficient_params: dict = field(default_factory=dict)
    weight: Weight = field(default_factory=Weight.unit)
    scheme: str = "crank_nicolson"
    dt: float | None = None
    k: int = 1
    t_grid: tuple = (0.1, 0.25, 0.5, 1.0)
    seed: int = 0
    count: int = 64
    max_mode: int = 32
    decay: float = 1.0
    checks: tuple = CHECKS
    output: str = "results"
    refine: bool = False
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        weight = {"kind": self.weight.kind}
        if self.weight.kind != "unit":
            weight[_WEIGHT_PARAM[self.weight.kind]] = self.weight.param
        return {
            "schema_version": self.schema_version,
            "grid": {"dim": self.dim, "L": self.L, "n": self.n},
            "coefficients": {"name": self.coefficients, "params": dict(self.coefficient_params)},
            "weight": weight,
            "time": {"scheme": self.scheme, "dt": self.dt},
            "k": self.k,
            "t_grid": list(self.t_grid),
            "ensemble": {"seed": self.seed, "count": self.count,
                         "max_mode": self.max_mode, "decay": self.decay},
            "checks": list(self.checks),
            "output": self.output,
            "refine": self.refine,
        }

    def with_overrides(self, *, seed=None, checks=None, refine=None, output=None) -> RunConfig:
        """Apply command-line overrides, re-validating the result."""
        data = self.to_dict()
        if seed is not None:
            data["ensemble"]["seed"] = seed
        if checks is not None:
            data["checks"] = list(checks)
        if refine is not None:
            data["refine"] = refine
        if output is not None:
            data["output"] = str(output)
        return config_from_dict(data)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v))


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def add(self, path: str, message: str):
        self.errors.append(f"{path}: {message}")

    def section(self, data: dict, name: str) -> dict:
        value = data.get(name, {})
        if not isinstance(value, dict):
            self.add(name, "must be a mapping")
            return {}
        allowed = _SECTIONS[name]
        for key in value:
            if key not in allowed:
                self.add(f"{name}.{key}", "unknown key")
        return value

    def integer(self, path, value, lo=None, hi=None):
        if not _is_int(value):
            self.add(path, f"must be an integer, got {value!r}")
            return None
        if lo is not None and value < lo:
            self.add(path, f"must be >= {lo}, got {value}")
        if hi is not None and value > hi:
            self.add(path, f"must be <= {hi}, got {value}")
        return value

    def positive(self, path, value):
        if not _is_number(value):
            self.add(path, f"must be a finite number, got {value!r}")
            return None
        if value <= 0:
            self.add(path, f"must be positive, got {value}")
            return None
        return float(value)


def config_from_dict(data) -> RunConfig:
    """Validate a parsed document and build a :class:`RunConfig`."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["<root>: config must be a mapping"])
    col = _Collector()
    d = RunConfig()
    for key in data:
        if key not in _SECTIONS:
            col.add(key, "unknown key")

    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        col.add("schema_version", f"unsupported version {version!r}; expected {SCHEMA_VERSION}")

    g = col.section(data, "grid")
    dim = col.integer("grid.dim", g.get("dim", d.dim), 1, 3)
    L = col.positive("grid.L", g.get("L", d.L))
    n = col.integer("grid.n", g.get("n", d.n), 16)
    if n is not None and n % 2:
        col.add("grid.n", f"must be even, got {n}")

    c = col.section(data, "coefficients")
    name = c.get("name", d.coefficients)
    params = c.get("params", {})
    if name not in CATALOG:
        col.add("coefficients.name", f"unknown field {name!r}; choose from {', '.join(CATALOG)}")
    elif not isinstance(params, dict):
        col.add("coefficients.params", "must be a mapping")
        params = {}
    else:
        for key, value in params.items():
            if key not in _FIELD_PARAMS[name]:
                col.add(f"coefficients.params.{key}", f"not a parameter of {name!r}")
            elif not _is_number(value):
                col.add(f"coefficients.params.{key}", f"must be a finite number, got {value!r}")
        if name == "anisotropic" and dim is not None and dim != 2:
            col.add("coefficients.name", "the anisotropic field needs grid.dim = 2")
        if name == "scaled_identity" and _is_number(params.get("c", 1.0)) and params.get("c", 1.0) <= 0:
            col.add("coefficients.params.c", "must be positive")

    w = col.section(data, "weight")
    kind = w.get("kind", "unit")
    weight = d.weight
    if kind not in _WEIGHT_PARAM:
        col.add("weight.kind", f"unknown kind {kind!r}; choose from {', '.join(_WEIGHT_PARAM)}")
    else:
        wanted = _WEIGHT_PARAM[kind]
        for key in ("alpha", "lambda"):
            if key in w and key != wanted:
                hint = f" (use weight.{wanted})" if wanted else ""
                col.add(f"weight.{key}", f"not valid for kind {kind!r}{hint}")
        if wanted is not None:
            if wanted not in w:
                col.add(f"weight.{wanted}", f"required for kind {kind!r}")
            elif not _is_number(w[wanted]):
                col.add(f"weight.{wanted}", f"must be a finite number, got {w[wanted]!r}")
            else:
                weight = Weight(kind, float(w[wanted]))
        else:
            weight = Weight.unit()

    t = col.section(data, "time")
    scheme = t.get("scheme", d.scheme)
    if scheme not in SCHEMES:
        col.add("time.scheme", f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
    dt = t.get("dt", None)
    if dt is not None:
        dt = col.positive("time.dt", dt)

    k = col.integer("k", data.get("k", d.k), 0, MAX_K)

    t_grid = data.get("t_grid", list(d.t_grid))
    if (not isinstance(t_grid, list) or not t_grid
            or not all(_is_number(v) and v > 0 for v in t_grid)):
        col.add("t_grid", "must be a non-empty list of positive numbers")
        t_grid = list(d.t_grid)
    elif t_grid != sorted(t_grid):
        col.add("t_grid", "must be ascending")

    e = col.section(data, "ensemble")
    seed = col.integer("ensemble.seed", e.get("seed", d.seed), 0)
    count = col.integer("ensemble.count", e.get("count", d.count), MIN_COUNT)
    max_mode = col.integer("ensemble.max_mode", e.get("max_mode", d.max_mode), 0)
    decay = col.positive("ensemble.decay", e.get("decay", d.decay))
    if n is not None and max_mode is not None and max_mode > n // 4:
        col.add("ensemble.max_mode", f"must be <= n/4 = {n // 4}, got {max_mode}")

    checks = data.get("checks", list(d.checks))
    if not isinstance(checks, list):
        col.add("checks", "must be a list")
        checks = []
    for i, name_i in enumerate(checks):
        if name_i not in CHECKS:
            col.add(f"checks[{i}]", f"unknown check {name_i!r}; choose from {', '.join(CHECKS)}")

    output = data.get("output", d.output)
    if not isinstance(output, str) or not output:
        col.add("output", "must be a non-empty path string")
    refine = data.get("refine", d.refine)
    if not isinstance(refine, bool):
        col.add("refine", f"must be true or false, got {refine!r}")

    if L is not None and n is not None:
        h = 2.0 * L / n
        step = h * h / 4.0 if dt is None else dt
        if "smoothing" in checks and 10 * step >= SMOOTHING_T_MAX:
            col.add("time.dt", f"smoothing needs 10 dt < {SMOOTHING_T_MAX}")
        if "kernel" in checks:
            t_min = min(KERNEL_TIMES)
            if 10 * step > t_min or 4 * h * h > t_min:
                col.add("grid.n", f"kernel times from {t_min} need 10 dt and 4 h^2 <= {t_min}")
            if name != "identity" and name != "scaled_identity" and L < math.pi:
                col.add("grid.L", "variable-coefficient kernel source at pi/2 needs L >= pi")

    if col.errors:
        raise ConfigError(col.errors)
    return RunConfig(dim=dim, L=L, n=n, coefficients=name, coefficient_params=dict(params),
                     weight=weight, scheme=scheme, dt=dt, k=k, t_grid=tuple(float(v) for v in t_grid),
                     seed=seed, count=count, max_mode=max_mode, decay=decay, checks=tuple(checks),
                     output=output, refine=refine, schema_version=version)


def parse_config(path) -> RunConfig:
    """Read and validate a YAML or JSON config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config: file not found: {path}"])
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: cannot parse {path}: {exc}"]) from exc
    return config_from_dict(data)
