"""
Time stepping for ``du/dt = -A u`` and the constant-coefficient heat oracle.

Each stepper factorizes its ``(I + theta dt A)`` once with a sparse LU and
reuses it. Implicit Euler (``theta = 1``) is unconditionally L2
non-expansive for symmetric positive ``A``; that is asserted after every
step. Crank-Nicolson (``theta = 1/2``) is second order in time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .elliptic import DiscreteOperator
from .errors import DomainError, SolverError
from .grid import Grid, GridFunction

SCHEMES = ("implicit_euler", "crank_nicolson")
SOLVER_RTOL = 1e-10
GROWTH_RTOL = 1e-10


@dataclass(frozen=True)
class EvolutionConfig:
    scheme: str = "crank_nicolson"
    dt: float = 1e-3
    t_final: float = 0.0
    store_trajectory: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not self.t_final >= 0:
            raise DomainError(f"t_final must be non-negative, got {self.t_final}")

    @property
    def steps(self) -> int:
        return step_plan(self.t_final, self.dt)[0]

    @property
    def effective_dt(self) -> float:
        return step_plan(self.t_final, self.dt)[1]


def step_plan(duration: float, dt: float) -> tuple[int, float]:
    """Number of steps and the (never larger) step that lands on ``duration``."""
    if duration <= 0:
        return 0, 0.0
    steps = max(1, math.ceil(duration / dt - 1e-9))
    return steps, duration / steps


def default_dt(grid: Grid) -> float:
    return grid.spacing**2 / 4.0


class Stepper:
    """One-step propagator for a fixed operator, scheme and step size."""

    def __init__(self, A: DiscreteOperator, scheme: str, dt: float, strict: bool = True):
        if scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {scheme!r}")
        self.A = A
        self.scheme = scheme
        self.dt = dt
        theta = 1.0 if scheme == "implicit_euler" else 0.5
        eye = sp.identity(A.grid.size, format="csc")
        self.lhs = (eye + theta * dt * A.matrix).tocsc()
        self.rhs = None if theta == 1.0 else (eye - (1.0 - theta) * dt * A.matrix).tocsr()
        self.lu = splu(self.lhs)
        self.strict = strict
        self.max_growth = 0.0

    def step(self, u: np.ndarray) -> np.ndarray:
        b = u if self.rhs is None else self.rhs @ u
        new = self.lu.solve(b)
        bnorm = np.linalg.norm(b)
        if bnorm > 0:
            resid = np.linalg.norm(self.lhs @ new - b) / bnorm
            if not resid <= SOLVER_RTOL:
                raise SolverError(f"linear solve residual {resid:.3e} exceeds {SOLVER_RTOL}")
        if self.scheme == "implicit_euler":
            before = np.linalg.norm(u, axis=0)
            after = np.linalg.norm(new, axis=0)
            growth = np.max(after - before * (1.0 + GROWTH_RTOL))
            self.max_growth = max(self.max_growth, float(growth))
            if growth > 0 and self.strict:
                raise SolverError(f"implicit Euler step grew the L2 norm by {growth:.3e}")
        return new

    def advance(self, u: np.ndarray, steps: int, on_step: Callable | None = None) -> np.ndarray:
        for i in range(steps):
            u = self.step(u)
            if on_step is not None:
                on_step(i + 1, u)
        return u


class Propagator:
    """Caches steppers per effective step size for one operator."""

    def __init__(self, A: DiscreteOperator, scheme: str = "crank_nicolson",
                 dt: float | None = None, strict: bool = True):
        self.A = A
        self.scheme = scheme
        self.strict = strict
        self.dt = default_dt(A.grid) if dt is None else float(dt)
        self._steppers: dict[float, Stepper] = {}

    def stepper(self, dt: float) -> Stepper:
        key = float(np.float64(dt))
        if key not in self._steppers:
            self._steppers[key] = Stepper(self.A, self.scheme, key, self.strict)
        return self._steppers[key]

    def advance(self, values: np.ndarray, duration: float,
                on_step: Callable | None = None) -> np.ndarray:
        """Advance flattened values (``(N,)`` or ``(N, m)``) by ``duration``.

        ``on_step(dt, u)`` is called after every step.
        """
        steps, dt = step_plan(duration, self.dt)
        if steps == 0:
            return np.array(values, dtype=float, copy=True)
        hook = None if on_step is None else (lambda i, u: on_step(dt, u))
        return self.stepper(dt).advance(np.asarray(values, dtype=float), steps, hook)

    @property
    def max_growth(self) -> float:
        return max((s.max_growth for s in self._steppers.values()), default=0.0)

    def at_times(self, values: np.ndarray, times, on_step: Callable | None = None) -> list[np.ndarray]:
        """States at each of the sorted ``times``, landing exactly on each."""
        out, t_prev, u = [], 0.0, np.asarray(values, dtype=float)
        for t in times:
            if t < t_prev:
                raise DomainError("times must be sorted ascending")
            u = self.advance(u, t - t_prev, on_step)
            out.append(u)
            t_prev = t
        return out


def evolve(A: DiscreteOperator, f: GridFunction, cfg: EvolutionConfig):
    """``u(t_final)`` from ``u(0) = f``.

    With ``cfg.store_trajectory`` the return value is ``(u, trajectory)``
    where ``trajectory`` lists ``(t, GridFunction)`` for every step.
    """
    if f.grid != A.grid:
        raise DomainError("operator and function live on different grids")
    steps, dt = step_plan(cfg.t_final, cfg.dt)
    traj = [(0.0, f)]
    if steps == 0:
        u = GridFunction(f.grid, f.values.copy())
        return (u, traj) if cfg.store_trajectory else u

    def record(i, values):
        traj.append((i * dt, GridFunction(f.grid, values)))

    stepper = Stepper(A, cfg.scheme, dt)
    values = stepper.advance(f.flat.copy(), steps,
                             record if cfg.store_trajectory else None)
    u = GridFunction(f.grid, values)
    return (u, traj) if cfg.store_trajectory else u


def heat_kernel_matrix(grid: Grid, c: float, t: float) -> np.ndarray:
    """1D quadrature matrix ``h K(t, x_i, x_j)`` of the heat kernel for ``a = c I``."""
    x = grid.axis
    diff = x[:, None] - x[None, :]
    return grid.spacing * np.exp(-diff**2 / (4.0 * c * t)) / np.sqrt(4.0 * np.pi * c * t)


def exact_heat(c: float, f: GridFunction, t: float) -> GridFunction:
    """Convolution of ``f`` with the Gaussian kernel of ``du/dt = c Laplace u``.

    The kernel is a product over axes, so the convolution is applied one
    axis at a time.
    """
    if not c > 0:
        raise DomainError(f"diffusivity must be positive, got {c}")
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    if t == 0:
        return GridFunction(f.grid, f.values.copy())
    kmat = heat_kernel_matrix(f.grid, c, t)
    out = f.values
    for axis in range(f.grid.dim):
        out = np.moveaxis(np.tensordot(kmat, out, axes=([1], [axis])), 0, axis)
    return GridFunction(f.grid, out)


Evolver = Callable[[GridFunction, float], GridFunction]


def scheme_evolver(A: DiscreteOperator, scheme: str = "crank_nicolson",
                   dt: float | None = None) -> Evolver:
    prop = Propagator(A, scheme, dt)

    def run(f: GridFunction, t: float) -> GridFunction:
        return GridFunction(f.grid, prop.advance(f.flat, t))

    return run


def exact_evolver(c: float) -> Evolver:
    return lambda f, t: exact_heat(c, f, t)


def _l2(values: np.ndarray) -> float:
    return float(np.linalg.norm(values))


def check_semigroup_property(evolver: Evolver, f: GridFunction, t: float, s: float) -> float:
    """Relative L2 defect of ``T_t T_s f`` against ``T_{t+s} f``."""
    if t < 0 or s < 0:
        raise DomainError("times must be non-negative")
    if s == 0:
        return 0.0
    base = _l2(f.values)
    if base == 0:
        return 0.0
    composed = evolver(evolver(f, s), t)
    direct = evolver(f, t + s)
    return _l2(composed.values - direct.values) / base


def check_commutation_with_A(A: DiscreteOperator, evolver: Evolver, f: GridFunction,
                             t: float) -> float:
    """Relative L2 defect of ``A T_t f`` against ``T_t A f``."""
    if t == 0:
        return 0.0
    lhs = A(evolver(f, t))
    rhs = evolver(A(f), t)
    scale = _l2(lhs.values)
    return _l2(lhs.values - rhs.values) / scale if scale > 0 else 0.0


def write_trajectory_csv(path, trajectory) -> Path:
    """Long-format CSV: ``t, x0[, x1, ...], value`` with one row per node and snapshot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if not trajectory:
            return path
        grid = trajectory[0][1].grid
        pts = grid.points().reshape(-1, grid.dim)
        writer.writerow(["t"] + [f"x{i}" for i in range(grid.dim)] + ["value"])
        for t, f in trajectory:
            for p, v in zip(pts, f.flat):
                writer.writerow([repr(float(t))] + [repr(float(c)) for c in p] + [repr(float(v))])
    return path
