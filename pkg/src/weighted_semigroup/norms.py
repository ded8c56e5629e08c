"""
Weighted Sobolev norms ``|f|_{H^k_w}^2 = sum_{|m| <= k} int |d^m f|^2 w dx``.

The sum runs over multi-indices, each counted once. Derivatives are composed
from central stencils: an axis differentiated ``p`` times gets ``p // 2``
second-difference passes and ``p % 2`` first-difference passes.

Everything here also works on batches: arrays shaped ``(m, *grid.shape)``
are treated as ``m`` grid functions.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .elliptic import DiscreteOperator
from .errors import DomainError, ResolutionWarning
from .grid import Grid, GridFunction, central_diff
from .weights import Weight

MAX_ORDER = 4
UNRESOLVED_FRACTION = 0.1


@dataclass(frozen=True)
class NormSpec:
    k: int = 0
    weight: Weight = field(default_factory=Weight.unit)
    derivative_scheme: str = "central"

    def __post_init__(self):
        if not 0 <= self.k <= MAX_ORDER:
            raise DomainError(f"Sobolev order must be in [0, {MAX_ORDER}], got {self.k}")
        if self.derivative_scheme != "central":
            raise DomainError(f"unknown derivative scheme {self.derivative_scheme!r}")


@lru_cache(maxsize=None)
def multi_indices(dim: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of length ``dim`` with ``|m| == order``."""
    return tuple(m for m in itertools.product(range(order + 1), repeat=dim)
                 if sum(m) == order)


def partial(values: np.ndarray, grid: Grid, m: tuple[int, ...]) -> np.ndarray:
    """``d^m`` of (possibly batched) grid values."""
    offset = values.ndim - grid.dim
    h = grid.spacing
    out = values
    for axis, p in enumerate(m):
        ax = offset + axis
        for _ in range(p // 2):
            out = central_diff(out, ax, h, 2)
        if p % 2:
            out = central_diff(out, ax, h, 1)
    return out


def sobolev_features(values: np.ndarray, grid: Grid, k: int, weight: Weight) -> np.ndarray:
    """Feature matrix ``F`` with ``|F[i]|^2 = |f_i|_{H^k_w}^2``.

    ``values`` is ``(m, *shape)``; the result is ``(m, P)`` so Gram matrices
    of the norm are ``F @ F.T``.
    """
    batch = values.shape[0]
    scale = np.sqrt(grid.cell_volume * weight(grid.points())).reshape(-1)
    cols = []
    for order in range(k + 1):
        for m in multi_indices(grid.dim, order):
            cols.append(partial(values, grid, m).reshape(batch, -1) * scale)
    return np.concatenate(cols, axis=1)


def sobolev_norms(values: np.ndarray, grid: Grid, k: int, weight: Weight) -> np.ndarray:
    """Row norms in ``H^k_w`` for a batch ``(m, *shape)``."""
    sq = np.zeros(values.shape[0])
    w = grid.cell_volume * weight(grid.points())
    for order in range(k + 1):
        for m in multi_indices(grid.dim, order):
            d = partial(values, grid, m)
            sq += np.sum((d * d * w).reshape(values.shape[0], -1), axis=1)
    return np.sqrt(sq)


def unresolved_fraction(f: GridFunction, k: int) -> float:
    """Share of ``(1+|xi|^2)^k``-weighted spectral energy above mode n/4."""
    grid = f.grid
    spec = np.abs(np.fft.fftn(f.values)) ** 2
    freq = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    mesh = np.meshgrid(*([freq] * grid.dim), indexing="ij")
    kmax = np.max(np.abs(np.stack(mesh)), axis=0)
    xi2 = sum((np.pi * m / grid.half_width) ** 2 for m in mesh)
    energy = spec * (1.0 + xi2) ** k
    total = energy.sum()
    if total == 0.0:
        return 0.0
    return float(energy[kmax > grid.n / 4].sum() / total)


def sobolev_norm(f: GridFunction, spec: NormSpec | int = 0) -> float:
    if isinstance(spec, int):
        spec = NormSpec(spec)
    if spec.k > 0:
        frac = unresolved_fraction(f, spec.k)
        if frac > UNRESOLVED_FRACTION:
            warnings.warn(
                f"{frac:.1%} of the H^{spec.k} energy lies above mode n/4",
                ResolutionWarning, stacklevel=2)
    return float(sobolev_norms(f.values[None], f.grid, spec.k, spec.weight)[0])


def weighted_l2_norm(f: GridFunction, weight: Weight | None = None) -> float:
    return sobolev_norm(f, NormSpec(0, weight or Weight.unit()))


class NormEquivalence(NamedTuple):
    C1_hat: float
    C2_hat: float
    ratios: list
    skipped: int


def equivalence_ratios(A: DiscreteOperator, values: np.ndarray, k: int,
                       weight: Weight) -> np.ndarray:
    """``(|A^k f|_{L2_w} + |f|_{H^{2k-1}_w}) / |f|_{H^{2k}_w}`` per batch row.

    Rows with zero norm come back as NaN.
    """
    grid = A.grid
    batch = values.shape[0]
    cols = values.reshape(batch, -1).T
    for _ in range(k):
        cols = A.apply(cols)
    akf = np.asarray(cols).T.reshape(values.shape)
    middle = (sobolev_norms(akf, grid, 0, weight)
              + sobolev_norms(values, grid, 2 * k - 1, weight))
    right = sobolev_norms(values, grid, 2 * k, weight)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(right > 0, middle / right, np.nan)


def norm_equivalence_check(A: DiscreteOperator, spec: NormSpec,
                           functions: list[GridFunction]) -> NormEquivalence:
    """Empirical constants of ``C1 |f|_{H^2k} <= |A^k f| + |f|_{H^{2k-1}} <= C2 |f|_{H^2k}``.

    ``spec.k`` is the operator power ``k >= 1``; the weight comes from ``spec``.
    """
    if spec.k < 1:
        raise DomainError("norm equivalence needs k >= 1")
    if 2 * spec.k > MAX_ORDER:
        raise DomainError(f"2k={2 * spec.k} exceeds the resolution budget {MAX_ORDER}")
    values = np.stack([f.values for f in functions])
    ratios = equivalence_ratios(A, values, spec.k, spec.weight)
    good = ratios[np.isfinite(ratios)]
    skipped = int(ratios.size - good.size)
    if good.size == 0:
        return NormEquivalence(float("nan"), float("nan"), [], skipped)
    return NormEquivalence(float(good.min()), float(good.max()),
                           [float(r) for r in good], skipped)


def span_sup_ratio(numerator: np.ndarray, denominator: np.ndarray,
                   rcond: float = 1e-10) -> float:
    """``sup_c |c @ numerator| / |c @ denominator|`` over the row span.

    Both arguments are feature matrices ``(m, P)`` for the same ``m``
    functions. Directions where the denominator Gram matrix is numerically
    singular are dropped.
    """
    u, s, vt = np.linalg.svd(denominator.T, full_matrices=False)
    keep = s > rcond * s[0]
    proj = numerator.T @ (vt[keep].T / s[keep])
    return float(np.linalg.norm(proj, 2))
