"""
Uniform tensor-product grids on a truncated box, zero-padded finite
differences, rectangle-rule quadrature and seeded band-limited test functions.

The box is ``[-L, L)^dim`` with ``n`` nodes per axis, ``x_i = -L + i h`` and
``h = 2L / n``. Values outside the box are treated as zero, so every
difference stencil below is a plain sparse matrix with no boundary rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import DataError, DomainError, ResolutionError

SUPPORT_FRACTION = 0.8


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[-half_width, half_width)^dim``."""

    dim: int
    half_width: float
    n: int
    boundary: str = "zero_padded"

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 16 or self.n % 2:
            raise DomainError(f"n must be even and >= 16, got {self.n}")
        if not self.half_width > 0 or not np.isfinite(self.half_width):
            raise DomainError(f"half_width must be positive, got {self.half_width}")
        if self.boundary != "zero_padded":
            raise DomainError(f"unsupported boundary {self.boundary!r}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    h = spacing

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return -self.half_width + self.spacing * np.arange(self.n)

    def coordinates(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.axis] * self.dim), indexing="ij")

    @cached_property
    def _points(self) -> np.ndarray:
        pts = np.stack(self.coordinates(), axis=-1)
        pts.flags.writeable = False
        return pts

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, dim)``."""
        return self._points

    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self._points**2, axis=-1))

    def refined(self) -> Grid:
        """Same box, half the spacing."""
        return Grid(self.dim, self.half_width, 2 * self.n, self.boundary)

    def nearest_index(self, point) -> tuple[int, ...]:
        point = np.broadcast_to(np.asarray(point, dtype=float), (self.dim,))
        idx = np.rint((point + self.half_width) / self.spacing).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise DomainError(f"point {tuple(point)} lies outside the grid")
        return tuple(int(i) for i in idx)

    def node(self, index) -> np.ndarray:
        return self._points[tuple(index)].copy()

    def function(self, f: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
        """Sample ``f(points)`` (points shaped ``(*shape, dim)``) on the nodes."""
        return GridFunction(self, np.asarray(f(self._points), dtype=float))

    def zeros(self) -> GridFunction:
        return GridFunction(self, np.zeros(self.shape))

    def delta(self, index) -> GridFunction:
        """Discrete delta with unit mass under the rectangle rule."""
        values = np.zeros(self.shape)
        values[tuple(index)] = 1.0 / self.cell_volume
        return GridFunction(self, values)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real scalar field sampled on the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            if values.size == self.grid.size:
                values = values.reshape(self.grid.shape)
            else:
                raise DataError(
                    f"expected {self.grid.size} values for grid of shape "
                    f"{self.grid.shape}, got shape {values.shape}"
                )
        if not np.all(np.isfinite(values)):
            raise DataError("grid function contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise DomainError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def _check_axis(grid: Grid, axis: int):
    if not 0 <= axis < grid.dim:
        raise DomainError(f"axis {axis} out of range for a {grid.dim}D grid")


def _shift(arr: np.ndarray, ax: int, offset: int) -> np.ndarray:
    """``out[i] = arr[i + offset]`` along ``ax`` with zeros outside."""
    out = np.zeros_like(arr)
    n = arr.shape[ax]
    dst = [slice(None)] * arr.ndim
    src = [slice(None)] * arr.ndim
    if offset > 0:
        dst[ax], src[ax] = slice(0, n - offset), slice(offset, n)
    else:
        dst[ax], src[ax] = slice(-offset, n), slice(0, n + offset)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def central_diff(arr: np.ndarray, ax: int, h: float, order: int = 1) -> np.ndarray:
    """Zero-padded central difference of ``arr`` along array axis ``ax``.

    Works on batched arrays; ``ax`` indexes the array, not the grid.
    """
    if order == 1:
        return (_shift(arr, ax, 1) - _shift(arr, ax, -1)) / (2.0 * h)
    if order == 2:
        return (_shift(arr, ax, 1) - 2.0 * arr + _shift(arr, ax, -1)) / (h * h)
    raise DomainError(f"derivative order must be 1 or 2, got {order}")


def forward_diff(arr: np.ndarray, ax: int, h: float) -> np.ndarray:
    return (_shift(arr, ax, 1) - arr) / h


def backward_diff(arr: np.ndarray, ax: int, h: float) -> np.ndarray:
    return (arr - _shift(arr, ax, -1)) / h


def differentiate(f: GridFunction, axis: int, order: int = 1) -> GridFunction:
    """Second-order central derivative ``d^order f / dx_axis^order``."""
    _check_axis(f.grid, axis)
    return GridFunction(f.grid, central_diff(f.values, axis, f.grid.spacing, order))


def forward_difference(f: GridFunction, axis: int) -> GridFunction:
    _check_axis(f.grid, axis)
    return GridFunction(f.grid, forward_diff(f.values, axis, f.grid.spacing))


def backward_difference(f: GridFunction, axis: int) -> GridFunction:
    _check_axis(f.grid, axis)
    return GridFunction(f.grid, backward_diff(f.values, axis, f.grid.spacing))


def integrate(f: GridFunction) -> float:
    """Rectangle rule ``h^dim * sum(values)``."""
    if not np.all(np.isfinite(f.values)):
        raise DataError("cannot integrate non-finite values")
    return float(f.grid.cell_volume * np.sum(f.values))


def difference_matrix(grid: Grid, axis: int, kind: str) -> sp.csr_matrix:
    """Sparse matrix of a one-sided difference along ``axis``.

    ``kind`` is ``"forward"`` or ``"backward"``. With zero padding the
    transpose of the forward matrix is minus the backward matrix.
    """
    _check_axis(grid, axis)
    n, h = grid.n, grid.spacing
    if kind == "forward":
        d1 = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n))
    elif kind == "backward":
        d1 = sp.diags([np.ones(n), -np.ones(n - 1)], [0, -1], shape=(n, n))
    else:
        raise DomainError(f"unknown difference kind {kind!r}")
    d1 = d1 / h
    left = sp.identity(n**axis)
    right = sp.identity(n ** (grid.dim - axis - 1))
    return sp.kron(sp.kron(left, d1), right, format="csr")


def bump(r: np.ndarray, radius: float) -> np.ndarray:
    """Smooth bump ``exp(1 - 1/(1 - (r/radius)^2))``, zero for ``r >= radius``."""
    s = np.asarray(r, dtype=float) / radius
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def support_mask(grid: Grid) -> np.ndarray:
    return grid.radius() < SUPPORT_FRACTION * grid.half_width


def random_band_limited(grid: Grid, seed: int, max_mode: int, decay: float) -> GridFunction:
    """Random trigonometric polynomial times a bump supported in ``|x| < 0.8 L``.

    Modes ``m`` with ``|m_i| <= max_mode`` have wavenumber ``pi m / L`` and
    complex Gaussian coefficients scaled by ``max(|m|, 1)^-decay``. The
    coefficients depend only on ``(seed, max_mode, dim)``, so refining the
    grid samples the same continuous function.
    """
    if max_mode < 0 or max_mode > grid.n // 4:
        raise ResolutionError(
            f"max_mode={max_mode} exceeds n/4={grid.n // 4}; derivatives up to "
            "order 4 would be unresolved"
        )
    if not decay > 0:
        raise DomainError(f"decay must be positive, got {decay}")
    rng = np.random.default_rng(seed)
    modes = np.arange(-max_mode, max_mode + 1)
    mshape = (modes.size,) * grid.dim
    coef = rng.standard_normal(mshape) + 1j * rng.standard_normal(mshape)
    mgrid = np.meshgrid(*([modes] * grid.dim), indexing="ij")
    mnorm = np.sqrt(sum(m.astype(float) ** 2 for m in mgrid))
    coef = coef * np.maximum(mnorm, 1.0) ** (-decay)

    table = np.exp(1j * np.pi / grid.half_width * np.outer(modes, grid.axis))
    if grid.dim == 1:
        field = coef @ table
    elif grid.dim == 2:
        field = np.einsum("ab,ai,bj->ij", coef, table, table)
    else:
        field = np.einsum("abc,ai,bj,ck->ijk", coef, table, table, table)
    values = field.real * bump(grid.radius(), SUPPORT_FRACTION * grid.half_width)
    return GridFunction(grid, values)
