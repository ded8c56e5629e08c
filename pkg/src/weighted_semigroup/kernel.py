"""
Empirical fundamental-solution columns and Gaussian envelope fits.

A kernel column ``K(t, ., y)`` is the evolution of a unit-mass discrete delta
at ``y``. Its gradient magnitude is fitted with

    |grad_x K| ~= C_hat t^-(d+1)/2 (r / sqrt t) exp(-c_hat r^2 / t),   r = |x - y|

which is exact for constant coefficients (``c_hat = 1/(4c)``,
``C_hat = (2c)^-1 (4 pi c)^-d/2``). The linear factor ``r / sqrt t`` is
absorbed into a pure Gaussian by :meth:`KernelFit.gaussian_envelope`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

from .elliptic import DiscreteOperator
from .errors import DomainError, InsufficientDataError, ResolutionError
from .grid import Grid, GridFunction, central_diff, integrate
from .semigroup import EvolutionConfig, Propagator, default_dt, evolve
from .weights import Weight

FIT_THRESHOLD = 1e-6
MIN_FIT_NODES = 20
ENVELOPE_SLACK = 1.05
BOX_HEADROOM = 3.0


@dataclass(frozen=True)
class KernelFit:
    C_hat: float
    c_hat: float
    r_squared: float
    t: float
    y: tuple
    nodes: int
    envelope_ratio: float

    @property
    def envelope_ok(self) -> bool:
        return self.envelope_ratio <= ENVELOPE_SLACK

    @property
    def C_envelope(self) -> float:
        """Smallest prefactor (with ``c_hat``) bounding every fitted node."""
        return self.C_hat * max(1.0, self.envelope_ratio)

    def envelope(self, r, t: float | None = None, d: int = 1) -> np.ndarray:
        t = self.t if t is None else t
        r = np.asarray(r, dtype=float)
        return (self.C_hat * t ** (-(d + 1) / 2) * (r / math.sqrt(t))
                * np.exp(-self.c_hat * r**2 / t))

    def gaussian_envelope(self, eps: float) -> tuple[float, float]:
        """``(C, c)`` with ``|grad K| <= C t^-(d+1)/2 exp(-c r^2/t)``, ``c = c_hat - eps``.

        Uses ``u exp(-eps u^2) <= (2 e eps)^-1/2``.
        """
        if not 0 < eps < self.c_hat:
            raise DomainError(f"eps must lie in (0, {self.c_hat}), got {eps}")
        return self.C_hat / math.sqrt(2.0 * math.e * eps), self.c_hat - eps

    def to_dict(self) -> dict:
        out = asdict(self)
        out["y"] = [float(v) for v in self.y]
        out["envelope_ok"] = self.envelope_ok
        out["C_envelope"] = self.C_envelope
        return out


def analytic_gradient_constants(c: float, d: int) -> tuple[float, float]:
    """``(C_hat, c_hat)`` of the exact kernel for ``a = c I``."""
    return 1.0 / (2.0 * c) * (4.0 * math.pi * c) ** (-d / 2), 1.0 / (4.0 * c)


def gradient_mass_constant(c: float, d: int) -> float:
    """``sqrt(t) * int |grad_x K| dx`` for ``a = c I``: ``Gamma((d+1)/2) / (Gamma(d/2) sqrt c)``."""
    return math.exp(gammaln((d + 1) / 2) - gammaln(d / 2)) / math.sqrt(c)


def calibrated_box_constant(d: int, headroom: float = BOX_HEADROOM) -> float:
    """Bound for ``sqrt(t) * weighted gradient mass``, fixed from the ``a = I`` closed form."""
    return headroom * gradient_mass_constant(1.0, d)


def default_sources(grid: Grid, count: int = 5, extent: float = 0.3) -> list[tuple[int, ...]]:
    """``count`` nodes spread along the first axis within ``|y| <= extent L``."""
    centre = grid.n // 2
    offsets = np.linspace(-extent, extent, count) * grid.half_width
    out = []
    for off in offsets:
        idx = [centre] * grid.dim
        idx[0] = grid.nearest_index([off] + [0.0] * (grid.dim - 1))[0]
        out.append(tuple(idx))
    return out


def estimate_kernel_column(A: DiscreteOperator, y_index, t: float,
                           cfg: EvolutionConfig | None = None) -> GridFunction:
    """Evolve ``delta_y`` (mass one) to time ``t``."""
    grid = A.grid
    dt = default_dt(grid) if cfg is None else cfg.dt
    scheme = "crank_nicolson" if cfg is None else cfg.scheme
    _check_time(grid, dt, t)
    y_index = tuple(y_index)
    _check_source(grid, y_index)
    return evolve(A, grid.delta(y_index), EvolutionConfig(scheme, dt, t))


def _check_time(grid: Grid, dt: float, t: float):
    if t < 10 * dt or t < 4 * grid.spacing**2:
        raise ResolutionError(
            f"t={t} is below the resolved range (needs t >= 10 dt = {10 * dt:.3g} "
            f"and t >= 4 h^2 = {4 * grid.spacing ** 2:.3g})")


def _check_source(grid: Grid, y_index):
    y = grid.node(y_index)
    if np.linalg.norm(y) > 0.5 * grid.half_width:
        raise DomainError(f"source {tuple(float(v) for v in y)} lies outside |y| <= L/2")


def kernel_columns(A: DiscreteOperator, sources, times, scheme: str = "crank_nicolson",
                   dt: float | None = None) -> dict[float, list[GridFunction]]:
    """Columns for every source at every (sorted) time, evolved as one batch."""
    grid = A.grid
    dt = default_dt(grid) if dt is None else dt
    times = sorted(float(t) for t in times)
    for t in times:
        _check_time(grid, dt, t)
    sources = [tuple(s) for s in sources]
    for s in sources:
        _check_source(grid, s)
    deltas = np.stack([grid.delta(s).flat for s in sources], axis=1)
    states = Propagator(A, scheme, dt).at_times(deltas, times)
    return {t: [GridFunction(grid, u[:, j]) for j in range(len(sources))]
            for t, u in zip(times, states)}


def gradient_magnitude(f: GridFunction) -> np.ndarray:
    h = f.grid.spacing
    sq = sum(central_diff(f.values, i, h) ** 2 for i in range(f.grid.dim))
    return np.sqrt(sq)


def fit_gradient_envelope(column: GridFunction, y, t: float) -> KernelFit:
    """Least-squares fit of ``log |grad K|`` with the known offset ``log(r / sqrt t)``.

    ``r_squared`` is the coefficient of determination of the model for
    ``log |grad K|`` on the fit region.
    """
    grid = column.grid
    y = np.asarray(y, dtype=float).reshape(grid.dim)
    g = gradient_magnitude(column)
    r = np.linalg.norm(grid.points() - y, axis=-1)
    region = (g >= FIT_THRESHOLD * g.max()) & (r > 0)
    nodes = int(np.count_nonzero(region))
    if nodes < MIN_FIT_NODES:
        raise InsufficientDataError(f"only {nodes} nodes above the fit threshold")
    X = r[region] ** 2 / t
    Y = np.log(g[region] * math.sqrt(t) / r[region])
    slope, intercept = np.polyfit(X, Y, 1)
    logg = np.log(g[region])
    resid = Y - (intercept + slope * X)
    ss_tot = float(np.sum((logg - logg.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    d = grid.dim
    C_hat = math.exp(intercept) * t ** ((d + 1) / 2)
    c_hat = -slope
    model = (math.exp(intercept) * (r[region] / math.sqrt(t))
             * np.exp(slope * X))
    ratio = float(np.max(g[region] / model))
    return KernelFit(float(C_hat), float(c_hat), float(min(max(r2, 0.0), 1.0)), float(t),
                     tuple(float(v) for v in y), nodes, ratio)


def gradient_mass(column: GridFunction, weight: Weight | None = None, y=None) -> float:
    """``int |grad_x K(t, x, y)| sqrt(w(x)/w(y)) dx`` for one column."""
    g = gradient_magnitude(column)
    if weight is not None and not weight.is_unit:
        grid = column.grid
        y = np.asarray(y, dtype=float).reshape(grid.dim)
        logr = weight.log_eval(grid.points()) - weight.log_eval(y)
        g = g * np.exp(0.5 * logr)
    return integrate(GridFunction(column.grid, g))


def check_weighted_kernel_mass(columns, weight: Weight, t: float,
                               C_box: float | None = None) -> tuple[float, bool]:
    """Max over sources of the weighted gradient mass and whether ``mass sqrt t <= C_box``.

    ``columns`` is a sequence of ``(y, column)`` pairs.
    """
    columns = list(columns)
    if not columns:
        raise DomainError("need at least one kernel column")
    grid = columns[0][1].grid
    C_box = calibrated_box_constant(grid.dim) if C_box is None else C_box
    mass = max(gradient_mass(col, weight, y) for y, col in columns)
    return float(mass), bool(mass * math.sqrt(t) <= C_box)


def loglog_slope(x, y) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)
