"""
Admissible weights and checks of their two defining conditions.

A weight ``w > 0`` is admissible when ``|grad w| <= C1 w`` everywhere and
``w(x) / w(y) <= C2 exp(C3 |x - y|)`` for all pairs. Two families are
provided, polynomial ``(1 + |x|^2)^alpha`` and exponential
``exp(lam sqrt(1 + |x|^2))``, plus the unit weight.

Polynomial ``C2``: the ratio ``(1+|x|^2)/(1+|y|^2)`` is at most
``4/3 (1 + |x-y|^2)`` (see :func:`check_lemma_ab`) and
``1 + s^2 <= 2 e^s`` for ``s >= 0``, so raising to ``|alpha|`` (after
swapping ``x`` and ``y`` when ``alpha < 0``) gives
``C2 = (8/3)^|alpha|`` with ``C3 = |alpha|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError
from .grid import Grid

KINDS = ("unit", "polynomial", "exponential")
_LOG_MAX = np.log(np.finfo(float).max)
GRADIENT_RTOL = 1e-12
RATIO_RTOL = 1e-12
LEMMA_TOL = 1e-12


@dataclass(frozen=True)
class Weight:
    kind: str = "unit"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if not np.isfinite(self.param):
            raise DomainError("weight parameter must be finite")
        if self.kind == "unit" and self.param != 0.0:
            raise DomainError("unit weight takes no parameter")

    @classmethod
    def polynomial(cls, alpha: float) -> Weight:
        return cls("polynomial", float(alpha))

    @classmethod
    def exponential(cls, lam: float) -> Weight:
        return cls("exponential", float(lam))

    @classmethod
    def unit(cls) -> Weight:
        return cls("unit", 0.0)

    @property
    def C1(self) -> float:
        return abs(self.param)

    @property
    def C2(self) -> float:
        if self.kind == "polynomial":
            return (8.0 / 3.0) ** abs(self.param)
        return 1.0

    @property
    def C3(self) -> float:
        return abs(self.param)

    @property
    def is_unit(self) -> bool:
        return self.kind == "unit" or self.param == 0.0

    def label(self) -> str:
        if self.kind == "polynomial":
            return f"polynomial(alpha={self.param:g})"
        if self.kind == "exponential":
            return f"exponential(lambda={self.param:g})"
        return "unit"

    def log_eval(self, x) -> np.ndarray:
        """``log w(x)`` for points shaped ``(..., d)``; never overflows."""
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        if self.kind == "polynomial":
            return self.param * np.log1p(r2)
        if self.kind == "exponential":
            return self.param * np.sqrt(1.0 + r2)
        return np.zeros(r2.shape)

    def __call__(self, x) -> np.ndarray:
        logw = self.log_eval(x)
        if np.any(np.abs(logw) > _LOG_MAX):
            x = np.asarray(x, dtype=float)
            bad = np.unravel_index(np.argmax(np.abs(logw)), logw.shape)
            raise RangeError(
                f"{self.label()} overflows at x={tuple(np.atleast_1d(x[bad]))}"
            )
        return np.exp(logw)

    eval = __call__

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        if self.kind == "polynomial":
            w = self(x)[..., None]
            return 2.0 * self.param * x * w / (1.0 + r2)
        if self.kind == "exponential":
            w = self(x)[..., None]
            return self.param * x / np.sqrt(1.0 + r2) * w
        return np.zeros_like(x)

    eval_gradient = gradient


def check_gradient_condition(w: Weight, grid: Grid) -> tuple[float, bool]:
    """Sup over nodes of ``|grad w| / w`` and whether it stays below ``C1``."""
    pts = grid.points()
    ratio = np.linalg.norm(w.gradient(pts), axis=-1) / w(pts)
    sup_ratio = float(np.max(ratio))
    return sup_ratio, sup_ratio <= w.C1 * (1.0 + GRADIENT_RTOL)


def ratio_margins(w: Weight, x, y) -> np.ndarray:
    """``w(x) / (w(y) C2 exp(C3 |x-y|))`` per pair, evaluated in log space."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = np.linalg.norm(x - y, axis=-1)
    return np.exp(w.log_eval(x) - w.log_eval(y) - np.log(w.C2) - w.C3 * dist)


def check_ratio_condition(w: Weight, x, y) -> tuple[float, bool]:
    """Worst margin of the ratio condition over the pairs ``(x[i], y[i])``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0:
        raise DomainError("ratio condition needs at least one pair")
    if x.shape != y.shape:
        raise DomainError(f"pair arrays differ in shape: {x.shape} vs {y.shape}")
    worst = float(np.max(ratio_margins(w, x, y)))
    return worst, worst <= 1.0 + RATIO_RTOL


def lemma_ab_margins(x, y) -> np.ndarray:
    """Relative slack of ``(1+|x|^2)/(1+|y|^2) <= 4/3 (1+|x-y|^2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lhs = (1.0 + np.sum(x * x, axis=-1)) / (1.0 + np.sum(y * y, axis=-1))
    rhs = 4.0 / 3.0 * (1.0 + np.sum((x - y) ** 2, axis=-1))
    return (rhs - lhs) / rhs


def check_lemma_ab(x, y) -> bool:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0:
        raise DomainError("lemma check needs at least one pair")
    return bool(np.min(lemma_ab_margins(x, y)) >= -LEMMA_TOL)


def random_pairs(seed: int, count: int, dim: int, bound: float = 10.0):
    """Seeded uniform pairs in ``[-bound, bound]^dim``."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-bound, bound, size=(count, dim))
    y = rng.uniform(-bound, bound, size=(count, dim))
    return x, y


def lattice_points(step: float, bound: float, dim: int) -> np.ndarray:
    ticks = np.arange(-bound, bound + 0.5 * step, step)
    mesh = np.meshgrid(*([ticks] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def lattice_lemma_sweep(step: float = 0.25, bound: float = 5.0, dim: int = 2,
                        chunk: int = 128) -> tuple[int, int, float]:
    """Check the ratio lemma on every ordered pair of lattice points.

    Returns ``(pairs_checked, violations, min_margin)``.
    """
    pts = lattice_points(step, bound, dim)
    checked = violations = 0
    worst = np.inf
    for start in range(0, len(pts), chunk):
        x = pts[start:start + chunk, None, :]
        margins = lemma_ab_margins(x, pts[None, :, :])
        checked += margins.size
        violations += int(np.count_nonzero(margins < -LEMMA_TOL))
        worst = min(worst, float(margins.min()))
    return checked, violations, worst
