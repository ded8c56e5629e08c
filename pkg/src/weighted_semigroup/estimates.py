"""
Numerical checks of the semigroup estimates over seeded function ensembles.

Every check returns an :class:`EstimateReport` holding its inputs, measured
quantities, a pass/fail verdict and a long-format table of
``(check, t, statistic, value)`` rows.

Operator norms are estimated in two ways: the largest ratio over ensemble
members, and the supremum over the linear span of the ensemble (see
:func:`~weighted_semigroup.norms.span_sup_ratio`). The span supremum is
the closer lower bound on the true operator norm and drives the verdicts.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from importlib import metadata
from typing import TYPE_CHECKING

import numpy as np

from .elliptic import (CoefficientField, DiscreteOperator, assemble_A,
                       check_commutator_bound, coefficient_field, trigonometric)
from .errors import ConfigError, DomainError, InsufficientDataError
from .grid import Grid, GridFunction, bump, central_diff, random_band_limited
from .kernel import (analytic_gradient_constants, calibrated_box_constant, default_sources,
                     fit_gradient_envelope, gradient_mass, kernel_columns, loglog_slope)
from .norms import NormSpec, norm_equivalence_check, sobolev_features, span_sup_ratio
from .semigroup import (Propagator, check_commutation_with_A, check_semigroup_property,
                        default_dt, scheme_evolver)
from .weights import (Weight, check_gradient_condition, check_ratio_condition,
                      lattice_lemma_sweep, lemma_ab_margins, random_pairs)

if TYPE_CHECKING:
    from .config import RunConfig

PASS, FAIL = "pass", "fail"
MIN_SUP_COUNT = 16

CONTRACTION_RTOL = 1e-10
UNIT_BOUND_RTOL = 1e-8
HK_STABILITY = 0.25
NORM_STABILITY = 0.25
COMMUTATOR_STABILITY = 0.20
SLOPE_RANGE = (-0.65, -0.35)
PREFACTOR_RTOL = 0.15
SMOOTHING_T_MAX = 0.1
SMOOTHING_POINTS = 6
LARGE_TIMES = (0.5, 1.0)
MONOTONE_RTOL = 1e-3
MIN_NORM_C1 = 1e-3
KERNEL_TIMES = (0.05, 0.1, 0.2, 0.4)
KERNEL_FIT_TIME = 0.25
KERNEL_C_RTOL = 0.05
KERNEL_R2_CONSTANT = 0.999
KERNEL_R2_VARIABLE = 0.95
SEMIGROUP_TOL = 1e-4
COMMUTATION_TOL = 1e-8
FIDELITY_RATIO = (3.4, 4.6)
WEIGHT_PAIRS = 100_000

CAVEAT = ("finite-difference surrogate on a zero-padded box; a failed verdict "
          "does not imply the continuous estimate is false")


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass(frozen=True)
class Ensemble:
    """Seeded family of random band-limited test functions.

    Member ``i`` uses the seed derived from ``(seed, i)``, so
    :meth:`doubled` extends the ensemble without changing existing members.
    """

    seed: int = 0
    count: int = 64
    max_mode: int = 32
    decay: float = 1.0

    def __post_init__(self):
        if self.seed < 0:
            raise DomainError(f"ensemble seed must be non-negative, got {self.seed}")
        if self.count < 1:
            raise DomainError(f"ensemble count must be positive, got {self.count}")
        if self.max_mode < 0:
            raise DomainError(f"max_mode must be non-negative, got {self.max_mode}")
        if not self.decay > 0:
            raise DomainError(f"decay must be positive, got {self.decay}")

    def member_seed(self, i: int) -> int:
        return int(np.random.SeedSequence([self.seed, i]).generate_state(1)[0])

    def seeds(self) -> list[int]:
        return [self.member_seed(i) for i in range(self.count)]

    def functions(self, grid: Grid) -> list[GridFunction]:
        return [random_band_limited(grid, s, self.max_mode, self.decay) for s in self.seeds()]

    def batch(self, grid: Grid) -> np.ndarray:
        """Member values stacked as ``(count, *grid.shape)``."""
        return np.stack([f.values for f in self.functions(grid)])

    def doubled(self) -> Ensemble:
        return replace(self, count=2 * self.count)

    def require_sup(self):
        if self.count < MIN_SUP_COUNT:
            raise DomainError(
                f"sup-ratio estimates need at least {MIN_SUP_COUNT} functions, got {self.count}")


@dataclass(frozen=True, eq=False)
class Problem:
    """Grid, coefficient field, weight and time discretization for one run."""

    grid: Grid
    coefficients: CoefficientField
    weight: Weight = field(default_factory=Weight.unit)
    scheme: str = "crank_nicolson"
    dt: float | None = None

    @cached_property
    def operator(self) -> DiscreteOperator:
        return assemble_A(self.coefficients, self.grid)

    @property
    def time_step(self) -> float:
        return default_dt(self.grid) if self.dt is None else self.dt

    def propagator(self, scheme: str | None = None, strict: bool = True) -> Propagator:
        return Propagator(self.operator, scheme or self.scheme, self.time_step, strict)

    def refined(self) -> Problem:
        """Same problem with ``h -> h/2`` and, for an explicit ``dt``, ``dt -> dt/4``."""
        dt = None if self.dt is None else self.dt / 4.0
        return Problem(self.grid.refined(), self.coefficients, self.weight, self.scheme, dt)

    def constant_diffusivity(self) -> float | None:
        """``c`` when ``a = c I``, else ``None``."""
        if not self.coefficients.is_constant:
            return None
        origin = np.zeros((1, self.grid.dim))
        return float(self.coefficients.matrix(origin).reshape(self.grid.dim, -1)[0, 0])

    def describe(self) -> dict:
        return {"grid": {"dim": self.grid.dim, "L": self.grid.half_width, "n": self.grid.n},
                "coefficients": self.coefficients.describe(),
                "weight": self.weight.label(),
                "scheme": self.scheme,
                "dt": self.time_step}


@dataclass
class EstimateReport:
    check_name: str
    inputs: dict
    measured: dict
    verdict: str = PASS
    table: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def add_row(self, statistic: str, value, t: float | None = None):
        self.table.append({"check": self.check_name, "t": t, "statistic": statistic,
                           "value": value})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> EstimateReport:
        return cls(**data)


def _report(name: str, inputs: dict, tolerances: dict, seeds=None) -> EstimateReport:
    prov = {"code_version": code_version(), "tolerances": tolerances}
    if seeds is not None:
        prov["seeds"] = seeds
    return EstimateReport(name, inputs, {}, PASS, [], [CAVEAT], prov)


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def relative_change(base: float, other: float) -> float:
    if base == other:
        return 0.0
    if base == 0 or not (math.isfinite(base) and math.isfinite(other)):
        return math.inf
    return abs(other - base) / abs(base)


def _ensemble_inputs(ensemble: Ensemble) -> dict:
    return asdict(ensemble)


def _evolve_batch(prop: Propagator, values: np.ndarray, times) -> list[np.ndarray]:
    """Evolve ``(m, *shape)`` members; returns one ``(m, *shape)`` array per time."""
    m = values.shape[0]
    cols = values.reshape(m, -1).T
    return [u.T.reshape(values.shape) for u in prop.at_times(cols, times)]


def _member_max(num: np.ndarray, den: np.ndarray) -> float:
    dn = np.linalg.norm(den, axis=1)
    good = dn > 0
    if not np.any(good):
        return math.nan
    return float(np.max(np.linalg.norm(num[good], axis=1) / dn[good]))


def _check_times(times, name: str = "t_grid") -> list[float]:
    times = [float(t) for t in times]
    if not times:
        raise DomainError(f"{name} must not be empty")
    if any(t <= 0 for t in times) or times != sorted(times):
        raise DomainError(f"{name} must be positive and ascending, got {times}")
    return times


# -- L2 contraction ---------------------------------------------------------

def check_l2_contraction(problem: Problem, ensemble: Ensemble, t_grid) -> EstimateReport:
    """Implicit-Euler contraction ``|T_t f| <= |f|`` for every member and time.

    Besides the final norms, every step is checked against the discrete
    energy identity ``|u_new|^2 + 2 dt <A u_new, u_new> <= |u_old|^2``.
    """
    times = _check_times(t_grid)
    grid, A = problem.grid, problem.operator
    rep = _report("l2_contraction",
                  {"problem": problem.describe() | {"scheme": "implicit_euler"},
                   "t_grid": times, "ensemble": _ensemble_inputs(ensemble)},
                  {"contraction_rtol": CONTRACTION_RTOL}, ensemble.seeds())
    seeds = ensemble.seeds()
    values = ensemble.batch(grid).reshape(ensemble.count, -1).T
    norm0 = np.linalg.norm(values, axis=0)
    prop = problem.propagator("implicit_euler", strict=False)

    state = {"prev": values, "energy_slack": 0.0, "step_growth": 0.0}

    def on_step(dt, u):
        prev = state["prev"]
        before = np.sum(prev * prev, axis=0)
        energy = np.sum(u * u, axis=0) + 2.0 * dt * np.sum(u * A.apply(u), axis=0)
        scale = np.where(before > 0, before, 1.0)
        state["energy_slack"] = max(state["energy_slack"],
                                    float(np.max((energy - before) / scale)))
        grow = np.linalg.norm(u, axis=0) - np.linalg.norm(prev, axis=0) * (1 + CONTRACTION_RTOL)
        state["step_growth"] = max(state["step_growth"], float(np.max(grow)))
        state["prev"] = u

    states = prop.at_times(values, times, on_step)
    violations, profile = [], []
    for t, u in zip(times, states):
        norms = np.linalg.norm(u, axis=0)
        bad = norms > norm0 * (1.0 + CONTRACTION_RTOL)
        violations += [{"seed": seeds[j], "t": t} for j in np.flatnonzero(bad)]
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(norm0 > 0, norms / norm0, 0.0)
        profile.append({"t": t, "max_ratio": float(ratio.max()), "mean_ratio": float(ratio.mean())})
        rep.add_row("max_ratio", float(ratio.max()), t)
        rep.add_row("mean_ratio", float(ratio.mean()), t)

    rep.measured = {"violations": violations, "decay_profile": profile,
                    "max_energy_slack": state["energy_slack"],
                    "max_step_growth": state["step_growth"]}
    ok = (not violations and state["step_growth"] <= 0
          and state["energy_slack"] <= CONTRACTION_RTOL)
    rep.verdict = _verdict(ok)
    return rep


# -- H^k_w boundedness ------------------------------------------------------

def hk_ratios(problem: Problem, k: int, ensemble: Ensemble, t_grid) -> list[dict]:
    """Per time: span supremum and member maximum of ``|T_t f|_{H^k_w} / |f|_{H^k_w}``."""
    times = _check_times(t_grid)
    grid, w = problem.grid, problem.weight
    values = ensemble.batch(grid)
    den = sobolev_features(values, grid, k, w)
    out = []
    for t, u in zip(times, _evolve_batch(problem.propagator(), values, times)):
        num = sobolev_features(u, grid, k, w)
        out.append({"t": t, "span_sup": span_sup_ratio(num, den),
                    "member_max": _member_max(num, den)})
    return out


def estimate_Hk_bound(problem: Problem, k: int, ensemble: Ensemble, t_grid,
                      refine: bool = True) -> tuple[float, EstimateReport]:
    """``C_T_hat = sup_{f, t} |T_t f|_{H^k_w} / |f|_{H^k_w}`` with stability probes.

    Passes when ``C_T_hat`` is finite and moves by at most 25% under
    ensemble doubling and, with ``refine``, under ``h -> h/2``.
    """
    ensemble.require_sup()
    NormSpec(k, problem.weight)
    times = _check_times(t_grid)
    rep = _report("hk_bound",
                  {"problem": problem.describe(), "k": k, "t_grid": times,
                   "ensemble": _ensemble_inputs(ensemble), "refine": refine},
                  {"stability": HK_STABILITY, "unit_bound_rtol": UNIT_BOUND_RTOL},
                  ensemble.seeds())
    base = hk_ratios(problem, k, ensemble, times)
    for row in base:
        rep.add_row("span_sup", row["span_sup"], row["t"])
        rep.add_row("member_max", row["member_max"], row["t"])
    C = max(r["span_sup"] for r in base)
    member = max(r["member_max"] for r in base)

    doubled = max(r["span_sup"] for r in hk_ratios(problem, k, ensemble.doubled(), times))
    changes = {"ensemble_doubling": relative_change(C, doubled)}
    measured = {"C_T_hat": C, "member_max": member, "C_T_hat_doubled": doubled,
                "per_t": base}
    if refine:
        fine = max(r["span_sup"] for r in hk_ratios(problem.refined(), k, ensemble, times))
        measured["C_T_hat_refined"] = fine
        changes["refinement"] = relative_change(C, fine)
    else:
        rep.notes.append("refinement probe skipped")
    measured["relative_changes"] = changes
    ok = math.isfinite(C) and all(c <= HK_STABILITY for c in changes.values())
    if k == 0 and problem.weight.is_unit and problem.scheme == "implicit_euler":
        ok = ok and C <= 1.0 + UNIT_BOUND_RTOL
    rep.measured = measured
    rep.add_row("C_T_hat", C)
    rep.verdict = _verdict(ok)
    return C, rep


# -- smoothing exponent -----------------------------------------------------

def smoothing_times(problem: Problem, points: int = SMOOTHING_POINTS,
                    t_max: float = SMOOTHING_T_MAX) -> np.ndarray:
    """Log-spaced window ``[10 dt, t_max]``."""
    t_min = 10.0 * problem.time_step
    if t_min >= t_max:
        raise DomainError(f"time step too large: 10 dt = {t_min} >= {t_max}")
    return np.geomspace(t_min, t_max, points)


def _gradient_features(values: np.ndarray, grid: Grid, k: int, w: Weight) -> np.ndarray:
    return np.concatenate([sobolev_features(central_diff(values, 1 + i, grid.spacing), grid, k, w)
                           for i in range(grid.dim)], axis=1)


def smoothing_ratios(problem: Problem, k: int, ensemble: Ensemble, times) -> tuple:
    """Span-sup and member-max of ``|grad T_t f|_{H^k_w} / |f|_{H^k_w}`` per time."""
    grid, w = problem.grid, problem.weight
    values = ensemble.batch(grid)
    den = sobolev_features(values, grid, k, w)
    span, member = [], []
    for u in _evolve_batch(problem.propagator(), values, times):
        num = _gradient_features(u, grid, k, w)
        span.append(span_sup_ratio(num, den))
        member.append(_member_max(num, den))
    return np.array(span), np.array(member)


def monotone_prefix(values, rtol: float = MONOTONE_RTOL) -> int:
    """Length of the leading run where ``values`` does not increase beyond ``rtol``."""
    end = 1
    while end < len(values) and values[end] <= values[end - 1] * (1.0 + rtol):
        end += 1
    return end


def _validate_window(problem: Problem, times) -> np.ndarray:
    times = np.asarray(_check_times(times), dtype=float)
    if times.size < SMOOTHING_POINTS:
        raise DomainError(f"smoothing fit needs at least {SMOOTHING_POINTS} times")
    if times[0] < 10.0 * problem.time_step * (1 - 1e-9) or times[-1] > SMOOTHING_T_MAX * (1 + 1e-9):
        raise DomainError(f"smoothing times must lie in [10 dt, {SMOOTHING_T_MAX}]")
    steps = np.diff(np.log(times))
    if not np.allclose(steps, steps[0], rtol=1e-6):
        raise DomainError("smoothing times must be log-spaced")
    return times


def fit_smoothing_exponent(problem: Problem, k: int, ensemble: Ensemble, t_grid=None,
                           refine: bool = False) -> tuple[float, float, EstimateReport]:
    """Power-law fit ``R(t) ~ C t^slope`` of the gradient smoothing ratio.

    ``R(t)`` is the span supremum of ``|grad T_t f|_{H^k_w} / |f|_{H^k_w}``.
    The fit uses the leading monotone part of the small-time window; the
    reported prefactor is ``max_t R(t) sqrt(t)``. Boundedness at the large
    times ``0.5`` and ``1.0`` is checked separately.
    """
    ensemble.require_sup()
    NormSpec(k, problem.weight)
    times = smoothing_times(problem) if t_grid is None else _validate_window(problem, t_grid)
    rep = _report("smoothing",
                  {"problem": problem.describe(), "k": k, "t_grid": [float(t) for t in times],
                   "large_times": list(LARGE_TIMES), "ensemble": _ensemble_inputs(ensemble),
                   "refine": refine},
                  {"slope_range": list(SLOPE_RANGE), "prefactor_rtol": PREFACTOR_RTOL,
                   "monotone_rtol": MONOTONE_RTOL}, ensemble.seeds())
    all_times = list(times) + [t for t in LARGE_TIMES if t > times[-1]]
    span, member = smoothing_ratios(problem, k, ensemble, all_times)
    R, R_large = span[:times.size], span[times.size:]
    for t, s, m in zip(all_times, span, member):
        rep.add_row("span_sup", float(s), float(t))
        rep.add_row("member_max", float(m), float(t))

    end = monotone_prefix(R)
    if end < times.size:
        rep.notes.append(f"R(t) not monotone; fit uses the first {end} times")
    measured = {"R": [float(v) for v in R], "member_max": [float(v) for v in member[:times.size]],
                "fit_points": end}
    ok = end >= 3
    slope = loglog_slope(times[:end], R[:end]) if end >= 2 else math.nan
    C_hat = float(np.max(R * np.sqrt(times)))
    measured |= {"slope": slope, "C_hat": C_hat,
                 "member_slope": loglog_slope(times, member[:times.size])}
    ok = ok and SLOPE_RANGE[0] <= slope <= SLOPE_RANGE[1]

    measured["R_large"] = [float(v) for v in R_large]
    bounded = bool(np.all(np.isfinite(R_large)) and np.all(R_large <= R.max()))
    measured["large_t_bounded"] = bounded
    ok = ok and bounded

    c = problem.constant_diffusivity()
    if c is not None and k == 0 and problem.weight.is_unit:
        analytic = 1.0 / math.sqrt(2.0 * math.e * c)
        err = relative_change(analytic, C_hat)
        measured |= {"analytic_prefactor": analytic, "prefactor_rel_error": err}
        ok = ok and err <= PREFACTOR_RTOL

    if refine:
        fine = problem.refined()
        ft = smoothing_times(fine)
        fspan, _ = smoothing_ratios(fine, k, ensemble, ft)
        fend = monotone_prefix(fspan)
        fslope = loglog_slope(ft[:fend], fspan[:fend]) if fend >= 2 else math.nan
        measured["slope_refined"] = fslope
        ok = ok and fend >= 3 and SLOPE_RANGE[0] <= fslope <= SLOPE_RANGE[1]

    rep.measured = measured
    rep.add_row("slope", slope)
    rep.add_row("C_hat", C_hat)
    rep.verdict = _verdict(ok)
    return slope, C_hat, rep


# -- norm equivalence and commutator -----------------------------------------

def check_norm_equivalence(problem: Problem, k: int, ensemble: Ensemble,
                           refine: bool = True) -> EstimateReport:
    """Empirical ``C1_hat, C2_hat`` of the ``A^k`` norm sandwich, with a refinement probe."""
    spec = NormSpec(k, problem.weight)
    rep = _report("norm_equivalence",
                  {"problem": problem.describe(), "k": k,
                   "ensemble": _ensemble_inputs(ensemble), "refine": refine},
                  {"stability": NORM_STABILITY, "min_C1": MIN_NORM_C1}, ensemble.seeds())
    base = norm_equivalence_check(problem.operator, spec, ensemble.functions(problem.grid))
    measured = {"C1_hat": base.C1_hat, "C2_hat": base.C2_hat, "skipped": base.skipped}
    ok = base.C1_hat >= MIN_NORM_C1 and math.isfinite(base.C2_hat)
    if refine:
        fine_p = problem.refined()
        fine = norm_equivalence_check(fine_p.operator, spec, ensemble.functions(fine_p.grid))
        changes = {"C1_hat": relative_change(base.C1_hat, fine.C1_hat),
                   "C2_hat": relative_change(base.C2_hat, fine.C2_hat)}
        measured |= {"C1_hat_refined": fine.C1_hat, "C2_hat_refined": fine.C2_hat,
                     "relative_changes": changes}
        ok = ok and all(c <= NORM_STABILITY for c in changes.values())
    else:
        rep.notes.append("refinement probe skipped")
    rep.measured = measured
    rep.add_row("C1_hat", base.C1_hat)
    rep.add_row("C2_hat", base.C2_hat)
    rep.verdict = _verdict(ok)
    return rep


def check_commutator(problem: Problem, ensemble: Ensemble, refine: bool = True) -> EstimateReport:
    """Empirical constant of ``|[grad, A] f| <= C (|grad^2 f| + |grad f|)``."""
    grid, a = problem.grid, problem.coefficients
    rep = _report("commutator",
                  {"problem": problem.describe(), "ensemble": _ensemble_inputs(ensemble),
                   "refine": refine},
                  {"stability": COMMUTATOR_STABILITY}, ensemble.seeds())
    base = check_commutator_bound(a, grid, ensemble.functions(grid))
    measured = {"empirical_C": base.empirical_C, "skipped": base.skipped,
                "coefficient_sup_norms": a.sup_norms(grid)}
    ok = math.isfinite(base.empirical_C)
    if refine:
        fine_grid = grid.refined()
        fine = check_commutator_bound(a, fine_grid, ensemble.functions(fine_grid))
        change = relative_change(base.empirical_C, fine.empirical_C)
        measured |= {"empirical_C_refined": fine.empirical_C, "relative_change": change}
        ok = ok and change <= COMMUTATOR_STABILITY
    else:
        rep.notes.append("refinement probe skipped")
    rep.measured = measured
    rep.add_row("empirical_C", base.empirical_C)
    rep.verdict = _verdict(ok)
    return rep


# -- kernel -----------------------------------------------------------------

def pinned_source(problem: Problem) -> tuple[int, ...]:
    """Origin for constant fields, else the node nearest ``(pi/2, 0, ...)``.

    ``2 + sin x1`` is even about ``x1 = pi/2``, which keeps the column close
    to radially symmetric.
    """
    point = np.zeros(problem.grid.dim)
    if not problem.coefficients.is_constant:
        point[0] = math.pi / 2
    return problem.grid.nearest_index(point)


def check_kernel(problem: Problem, times=KERNEL_TIMES, fit_time: float = KERNEL_FIT_TIME,
                 source=None) -> EstimateReport:
    """Gaussian envelope fit, gradient-mass decay and weighted-mass bound of ``K``."""
    grid, A = problem.grid, problem.operator
    times = _check_times(times, "kernel times")
    source = pinned_source(problem) if source is None else tuple(source)
    sources = default_sources(grid)
    C_box = calibrated_box_constant(grid.dim)
    c = problem.constant_diffusivity()
    rep = _report("kernel",
                  {"problem": problem.describe(), "times": times, "fit_time": fit_time,
                   "source": [float(v) for v in grid.node(source)],
                   "sweep_sources": [[float(v) for v in grid.node(s)] for s in sources]},
                  {"c_hat_rtol": KERNEL_C_RTOL, "r2_constant": KERNEL_R2_CONSTANT,
                   "r2_variable": KERNEL_R2_VARIABLE, "slope_range": list(SLOPE_RANGE),
                   "C_box": C_box})
    all_times = sorted(set(times) | {float(fit_time)})
    cols = kernel_columns(A, sources + [source], all_times, problem.scheme, problem.time_step)

    y = grid.node(source)
    fit = fit_gradient_envelope(cols[fit_time][-1], y, fit_time)
    measured = {"fit": fit.to_dict(), "C_box": C_box}
    per_source = []
    for s, col in zip(sources, cols[fit_time][:-1]):
        try:
            per_source.append(fit_gradient_envelope(col, grid.node(s), fit_time).to_dict())
        except InsufficientDataError as exc:
            rep.notes.append(f"fit at {tuple(grid.node(s))} skipped: {exc}")
    measured["sweep_fits"] = per_source

    if c is not None:
        _, c_exact = analytic_gradient_constants(c, grid.dim)
        err = relative_change(c_exact, fit.c_hat)
        measured |= {"c_hat_exact": c_exact, "c_hat_rel_error": err}
        ok = err <= KERNEL_C_RTOL and fit.r_squared >= KERNEL_R2_CONSTANT
    else:
        ok = fit.r_squared >= KERNEL_R2_VARIABLE

    mass, weighted, unit_bound = [], [], []
    for t in times:
        m = gradient_mass(cols[t][-1])
        wm = max(gradient_mass(col, problem.weight, grid.node(s))
                 for s, col in zip(sources + [source], cols[t]))
        mass.append(m)
        weighted.append(wm)
        unit_bound.append(wm * math.sqrt(t) <= C_box)
        rep.add_row("gradient_mass", m, t)
        rep.add_row("weighted_mass_sqrt_t", wm * math.sqrt(t), t)
    slope = loglog_slope(times, mass) if len(times) >= 2 else math.nan
    decreasing = bool(np.all(np.diff(mass) < 0))
    measured |= {"gradient_mass": mass, "mass_slope": slope,
                 "weighted_mass_sqrt_t": [wm * math.sqrt(t) for wm, t in zip(weighted, times)],
                 "weighted_bounded": all(unit_bound), "mass_decreasing": decreasing}
    ok = (ok and SLOPE_RANGE[0] <= slope <= SLOPE_RANGE[1] and all(unit_bound)
          and decreasing)
    rep.measured = measured
    rep.add_row("c_hat", fit.c_hat, fit_time)
    rep.add_row("C_hat", fit.C_hat, fit_time)
    rep.add_row("r_squared", fit.r_squared, fit_time)
    rep.add_row("mass_slope", slope)
    rep.verdict = _verdict(ok)
    return rep


# -- semigroup identities ---------------------------------------------------

def check_semigroup(problem: Problem, ensemble: Ensemble, t: float = 0.3,
                    s: float = 0.2) -> EstimateReport:
    """``T_t T_s = T_{t+s}`` and ``A T_t = T_t A`` on the first ensemble member."""
    rep = _report("semigroup",
                  {"problem": problem.describe(), "t": t, "s": s,
                   "ensemble": _ensemble_inputs(ensemble)},
                  {"semigroup_tol": SEMIGROUP_TOL, "commutation_tol": COMMUTATION_TOL},
                  ensemble.seeds()[:1])
    f = random_band_limited(problem.grid, ensemble.member_seed(0), ensemble.max_mode,
                            ensemble.decay)
    evolver = scheme_evolver(problem.operator, problem.scheme, problem.time_step)
    defect = check_semigroup_property(evolver, f, t, s)
    comm = check_commutation_with_A(problem.operator, evolver, f, t)
    rep.measured = {"semigroup_defect": defect, "commutation_defect": comm}
    rep.add_row("semigroup_defect", defect, t + s)
    rep.add_row("commutation_defect", comm, t)
    rep.verdict = _verdict(defect <= SEMIGROUP_TOL and comm <= COMMUTATION_TOL)
    return rep


# -- weights and the ratio lemma --------------------------------------------

def _weight_grid(dim: int) -> Grid:
    return Grid(dim, 10.0, 256 if dim == 1 else 128)


def check_weights(weights, dims=(1, 2), pairs: int = WEIGHT_PAIRS, seed: int = 0) -> EstimateReport:
    """Gradient and ratio conditions for each weight in each dimension."""
    weights = list(weights)
    rep = _report("weights",
                  {"weights": [w.label() for w in weights], "dims": list(dims), "pairs": pairs,
                   "bound": 10.0},
                  {"gradient_rtol": 1e-12, "ratio_rtol": 1e-12}, [seed])
    rows, ok = [], True
    for w in weights:
        for d in dims:
            sup, g_ok = check_gradient_condition(w, _weight_grid(d))
            x, y = random_pairs(seed, pairs, d)
            fwd, f_ok = check_ratio_condition(w, x, y)
            bwd, b_ok = check_ratio_condition(w, y, x)
            row = {"weight": w.label(), "dim": d, "C1": w.C1, "C2": w.C2, "C3": w.C3,
                   "sup_ratio": sup, "gradient_ok": g_ok,
                   "worst_ratio_margin": max(fwd, bwd), "ratio_ok": f_ok and b_ok}
            rows.append(row)
            ok = ok and g_ok and f_ok and b_ok
            rep.add_row(f"sup_ratio[{w.label()},d={d}]", sup)
            rep.add_row(f"worst_ratio_margin[{w.label()},d={d}]", max(fwd, bwd))
    rep.measured = {"weights": rows}
    rep.verdict = _verdict(ok)
    return rep


def check_lemma(seed: int = 0, pairs: int = WEIGHT_PAIRS, step: float = 0.25,
                bound: float = 5.0) -> EstimateReport:
    """Ratio lemma on every lattice pair in ``[-bound, bound]^2`` and on random pairs."""
    rep = _report("lemma", {"step": step, "bound": bound, "pairs": pairs, "dim": 2},
                  {"lemma_tol": 1e-12}, [seed])
    checked, lattice_bad, lattice_min = lattice_lemma_sweep(step, bound, 2)
    x, y = random_pairs(seed, pairs, 2, bound=10.0)
    margins = lemma_ab_margins(x, y)
    random_bad = int(np.count_nonzero(margins < -1e-12))
    rep.measured = {"lattice_pairs": checked, "lattice_violations": lattice_bad,
                    "lattice_min_margin": lattice_min, "random_pairs": pairs,
                    "random_violations": random_bad, "random_min_margin": float(margins.min())}
    rep.add_row("lattice_min_margin", lattice_min)
    rep.add_row("random_min_margin", float(margins.min()))
    rep.verdict = _verdict(lattice_bad == 0 and random_bad == 0)
    return rep


# -- operator fidelity ------------------------------------------------------

def masked_cosine(x: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``phi = cos(x) b(x)`` with the bump ``b`` of ``radius``, and its first two derivatives."""
    s = np.abs(x) / radius
    inside = s < 1.0
    xs = np.where(inside, x, 0.0)
    s = xs / radius
    q = 1.0 - s**2
    b = bump(np.abs(xs), radius)
    b1 = b * (-2.0 * s / (radius * q**2))
    b2 = b / radius**2 * (4.0 * s**2 / q**4 - 2.0 / q**2 - 8.0 * s**2 / q**3)
    c, sn = np.cos(xs), np.sin(xs)
    phi = c * b
    d1 = -sn * b + c * b1
    d2 = -c * b - 2.0 * sn * b1 + c * b2
    zero = np.zeros_like(x)
    return (np.where(inside, phi, zero), np.where(inside, d1, zero), np.where(inside, d2, zero))


def operator_error(a: CoefficientField, n: int) -> tuple[float, float]:
    """Relative L2 error of ``A_h phi`` for the masked cosine in 1D, and the symmetry defect."""
    grid = Grid(1, math.pi, n)
    x = grid.axis
    radius = 0.8 * math.pi
    phi, d1, d2 = masked_cosine(x, radius)
    pts = x[:, None]
    coef = a.matrix(pts)[:, 0, 0]
    dcoef = a.gradient(pts)[:, 0, 0, 0]
    exact = -(dcoef * d1 + coef * d2)
    A = assemble_A(a, grid)
    err = np.linalg.norm(A.apply(phi) - exact) / np.linalg.norm(exact)
    return float(err), A.symmetry_defect()


def check_operator_fidelity(ns=(128, 256), coefficients: CoefficientField | None = None) -> EstimateReport:
    """Second-order consistency of the assembled operator against a closed form."""
    a = trigonometric(1) if coefficients is None else coefficients
    if a.dim != 1:
        raise DomainError("operator fidelity is measured in 1D")
    rep = _report("operator_fidelity", {"coefficients": a.describe(), "n": list(ns),
                                        "phi": "cos(x) * bump(|x|, 0.8 pi) on L = pi"},
                  {"ratio_range": list(FIDELITY_RATIO), "symmetry_defect": 0.0})
    errors, defects = [], []
    for n in ns:
        e, s = operator_error(a, n)
        errors.append(e)
        defects.append(s)
        rep.add_row("relative_error", e)
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    rep.measured = {"relative_errors": errors, "ratios": ratios, "symmetry_defects": defects}
    ok = (all(FIDELITY_RATIO[0] <= r <= FIDELITY_RATIO[1] for r in ratios)
          and all(d == 0.0 for d in defects))
    rep.verdict = _verdict(ok)
    return rep


# -- suite ------------------------------------------------------------------

CHECKS = ("weights", "lemma", "operator_fidelity", "l2_contraction", "semigroup",
          "hk_bound", "smoothing", "norm_equivalence", "commutator", "kernel")


def build_problem(config: RunConfig) -> Problem:
    """Problem for a run; assembles ``A`` eagerly so construction errors surface first."""
    grid = Grid(config.dim, config.L, config.n)
    a = coefficient_field(config.coefficients, config.dim, **config.coefficient_params)
    problem = Problem(grid, a, config.weight, config.scheme, config.dt)
    problem.operator
    return problem


def run_check(name: str, problem: Problem, config: RunConfig) -> EstimateReport:
    ens = Ensemble(config.seed, config.count, config.max_mode, config.decay)
    refine = config.refine
    if name == "weights":
        return check_weights([problem.weight], seed=config.seed)
    if name == "lemma":
        return check_lemma(config.seed)
    if name == "operator_fidelity":
        return check_operator_fidelity()
    if name == "l2_contraction":
        return check_l2_contraction(problem, ens, config.t_grid)
    if name == "semigroup":
        return check_semigroup(problem, ens)
    if name == "hk_bound":
        return estimate_Hk_bound(problem, config.k, ens, config.t_grid, refine)[1]
    if name == "smoothing":
        return fit_smoothing_exponent(problem, config.k, ens, refine=refine)[2]
    if name == "norm_equivalence":
        return check_norm_equivalence(problem, max(config.k, 1), ens, refine)
    if name == "commutator":
        return check_commutator(problem, ens, refine)
    if name == "kernel":
        return check_kernel(problem)
    raise ConfigError([f"checks: unknown check {name!r}; choose from {', '.join(CHECKS)}"])


def run_suite(config: RunConfig, checks=None) -> list[EstimateReport]:
    """Run the selected checks in declared order."""
    names = list(config.checks if checks is None else checks)
    unknown = [c for c in names if c not in CHECKS]
    if unknown:
        raise ConfigError([f"checks: unknown check {c!r}" for c in unknown])
    if not names:
        return []
    problem = build_problem(config)
    return [run_check(name, problem, config) for name in names]
