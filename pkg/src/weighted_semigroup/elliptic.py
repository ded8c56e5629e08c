"""
Divergence-form operators ``A u = -sum_ij d_i(a_ij d_j u)`` on a grid.

Assembly averages the ``2^dim`` quadrant stencils

    A = 2^-dim * sum_sigma sum_ij (D_i^sigma)^T diag(a_ij(x + sigma h/2)) D_j^sigma

where ``D^+`` / ``D^-`` are forward / backward differences. Every quadrant
term is a quadratic form, so ``A`` is symmetric and
``<u, A u> >= lam * |grad_- u|^2`` holds node by node; the average restores
second-order consistency of the mixed terms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, EllipticityError
from .grid import Grid, GridFunction, central_diff, difference_matrix

MatrixFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric matrix field ``a(x)`` with its first derivatives.

    ``matrix(x)`` maps points ``(..., d)`` to ``(..., d, d)``;
    ``gradient(x)`` maps them to ``(..., d, d, d)`` with the derivative
    direction last. ``ellipticity`` is the declared lower bound on the
    smallest eigenvalue, or ``None`` for fields that need not be elliptic
    (commutator coefficients).
    """

    name: str
    dim: int
    matrix: MatrixFn
    gradient: MatrixFn | None
    ellipticity: float | None
    params: dict = field(default_factory=dict)

    @property
    def is_constant(self) -> bool:
        return self.name in ("identity", "scaled_identity")

    def derivative(self, axis: int) -> CoefficientField:
        """The field ``d a / d x_axis`` (coefficients of the commutator)."""
        if self.gradient is None:
            raise DomainError(f"field {self.name!r} has no closed-form gradient")
        if not 0 <= axis < self.dim:
            raise DomainError(f"axis {axis} out of range for dim {self.dim}")
        grad = self.gradient
        return CoefficientField(
            name=f"d{axis}({self.name})",
            dim=self.dim,
            matrix=lambda x: grad(x)[..., axis],
            gradient=None,
            ellipticity=None,
            params=dict(self.params, derivative_axis=axis),
        )

    def sup_norms(self, grid: Grid) -> dict:
        """Grid sup of the entries and of their first derivatives."""
        pts = grid.points()
        out = {"sup_a": float(np.max(np.abs(self.matrix(pts))))}
        if self.gradient is not None:
            out["sup_grad_a"] = float(np.max(np.abs(self.gradient(pts))))
        return out

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, "params": dict(self.params),
                "ellipticity": self.ellipticity}


def _eye(x, d):
    return np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d))


def identity(dim: int = 1) -> CoefficientField:
    return scaled_identity(1.0, dim, name="identity")


def scaled_identity(c: float, dim: int = 1, name: str = "scaled_identity") -> CoefficientField:
    c = float(c)
    return CoefficientField(
        name=name,
        dim=dim,
        matrix=lambda x: c * _eye(x, dim),
        gradient=lambda x: np.zeros(x.shape[:-1] + (dim, dim, dim)),
        ellipticity=c,
        params={} if name == "identity" else {"c": c},
    )


def trigonometric(dim: int = 1, base: float = 2.0, amplitude: float = 1.0) -> CoefficientField:
    """``a(x) = (base + amplitude sin x_1) I``."""
    base, amplitude = float(base), float(amplitude)

    def matrix(x):
        s = base + amplitude * np.sin(x[..., 0])
        return s[..., None, None] * _eye(x, dim)

    def gradient(x):
        g = np.zeros(x.shape[:-1] + (dim, dim, dim))
        dc = amplitude * np.cos(x[..., 0])
        for i in range(dim):
            g[..., i, i, 0] = dc
        return g

    return CoefficientField("trigonometric", dim, matrix, gradient,
                            base - abs(amplitude),
                            {"base": base, "amplitude": amplitude})


def anisotropic() -> CoefficientField:
    """2D field with cross terms; diagonals >= 1, |a_12| <= 1/2, so lam = 1/2."""

    def matrix(x):
        x1, x2 = x[..., 0], x[..., 1]
        a = np.empty(x.shape[:-1] + (2, 2))
        a[..., 0, 0] = 2.0 + np.sin(x1)
        a[..., 1, 1] = 2.0 + np.cos(x2)
        a[..., 0, 1] = a[..., 1, 0] = 0.5 * np.sin(x1) * np.cos(x2)
        return a

    def gradient(x):
        x1, x2 = x[..., 0], x[..., 1]
        g = np.zeros(x.shape[:-1] + (2, 2, 2))
        g[..., 0, 0, 0] = np.cos(x1)
        g[..., 1, 1, 1] = -np.sin(x2)
        g[..., 0, 1, 0] = g[..., 1, 0, 0] = 0.5 * np.cos(x1) * np.cos(x2)
        g[..., 0, 1, 1] = g[..., 1, 0, 1] = -0.5 * np.sin(x1) * np.sin(x2)
        return g

    return CoefficientField("anisotropic", 2, matrix, gradient, 0.5, {})


CATALOG = ("identity", "scaled_identity", "trigonometric", "anisotropic")


def coefficient_field(name: str, dim: int, **params) -> CoefficientField:
    """Look up a catalog field by name."""
    if name == "identity":
        return identity(dim)
    if name == "scaled_identity":
        return scaled_identity(params.get("c", 1.0), dim)
    if name == "trigonometric":
        return trigonometric(dim, params.get("base", 2.0), params.get("amplitude", 1.0))
    if name == "anisotropic":
        if dim != 2:
            raise DomainError("the anisotropic field is two-dimensional")
        return anisotropic()
    raise DomainError(f"unknown coefficient field {name!r}; choose from {CATALOG}")


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Sparse matrix acting on flattened grid-function values."""

    matrix: sp.csr_matrix
    grid: Grid
    order: int = 2
    provenance: str = "A"

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Apply to ``(N,)`` or column-batched ``(N, m)`` arrays."""
        return self.matrix @ values

    def __call__(self, f: GridFunction) -> GridFunction:
        if f.grid != self.grid:
            raise DomainError("operator and function live on different grids")
        return GridFunction(self.grid, self.matrix @ f.flat)

    def __matmul__(self, other: DiscreteOperator) -> DiscreteOperator:
        return DiscreteOperator((self.matrix @ other.matrix).tocsr(), self.grid,
                                self.order + other.order,
                                f"{self.provenance}*{other.provenance}")

    def symmetry_defect(self) -> float:
        diff = self.matrix - self.matrix.T
        return float(abs(diff).max()) if diff.nnz else 0.0


def _check_elliptic(a: CoefficientField, grid: Grid, pts: np.ndarray):
    mats = a.matrix(pts).reshape(-1, a.dim, a.dim)
    if not np.allclose(mats, np.swapaxes(mats, -1, -2), rtol=0, atol=1e-14):
        raise EllipticityError(f"coefficient field {a.name!r} is not symmetric")
    eig = np.linalg.eigvalsh(mats)[:, 0]
    lam = a.ellipticity
    bound = 0.0 if lam is None else lam * (1.0 - 1e-12)
    bad = int(np.argmin(eig))
    if lam is None or lam <= 0 or eig[bad] < bound or eig[bad] <= 0:
        point = tuple(float(v) for v in pts.reshape(-1, a.dim)[bad])
        raise EllipticityError(
            f"coefficient field {a.name!r} is not uniformly elliptic: smallest "
            f"eigenvalue {eig[bad]:.6g} at x={point} (declared lambda={lam})"
        )


def assemble(a: CoefficientField, grid: Grid, *, check: bool = True,
             provenance: str = "A") -> DiscreteOperator:
    if a.dim != grid.dim:
        raise DomainError(f"field is {a.dim}D but grid is {grid.dim}D")
    d, h = grid.dim, grid.spacing
    nodes = grid.points()
    if check:
        _check_elliptic(a, grid, nodes)
    fwd = [difference_matrix(grid, i, "forward") for i in range(d)]
    bwd = [difference_matrix(grid, i, "backward") for i in range(d)]
    total = sp.csr_matrix((grid.size, grid.size))
    for sigma in itertools.product((1, -1), repeat=d):
        pts = nodes + 0.5 * h * np.asarray(sigma, dtype=float)
        if check:
            _check_elliptic(a, grid, pts)
        amat = a.matrix(pts).reshape(-1, d, d)
        diffs = [fwd[i] if s > 0 else bwd[i] for i, s in enumerate(sigma)]
        for i in range(d):
            for j in range(d):
                coeff = amat[:, i, j]
                if not np.any(coeff):
                    continue
                total = total + diffs[i].T @ sp.diags(coeff) @ diffs[j]
    total = total / 2**d
    total = (0.5 * (total + total.T)).tocsr()
    total.eliminate_zeros()
    return DiscreteOperator(total, grid, 2, provenance)


def assemble_A(a: CoefficientField, grid: Grid) -> DiscreteOperator:
    """Discrete ``A``; raises :class:`EllipticityError` on a non-elliptic field."""
    return assemble(a, grid, check=True, provenance="A")


def apply_power(A: DiscreteOperator, f: GridFunction, k: int) -> GridFunction:
    if k < 1:
        raise DomainError(f"power must be >= 1, got {k}")
    values = f.flat
    for _ in range(k):
        values = A.apply(values)
    return GridFunction(f.grid, values)


def commutator_grad_A(a: CoefficientField, grid: Grid, axis: int) -> DiscreteOperator:
    """``[d_axis, A]``: the divergence-form operator with coefficients ``d_axis a``.

    Note the sign: ``d_l(A u) - A(d_l u) = -sum_ij d_i((d_l a_ij) d_j u)``,
    i.e. the same convention as ``A`` itself.
    """
    return assemble(a.derivative(axis), grid, check=False,
                    provenance=f"[d{axis},A]")


def commutator_defect(A: DiscreteOperator, C: DiscreteOperator, f: GridFunction,
                      axis: int) -> GridFunction:
    """``d(A f) - A(d f) - C f`` with central differences for ``d``."""
    h = f.grid.spacing
    lhs = central_diff(A(f).values, axis, h) - A.apply(
        central_diff(f.values, axis, h).reshape(-1)).reshape(f.grid.shape)
    return GridFunction(f.grid, lhs - C(f).values)


def staggered_energy(f: GridFunction) -> float:
    """Mean over quadrants of ``sum_i |D_i^sigma f|^2`` (rectangle rule).

    This is the gradient energy that bounds ``<f, A f> / lam`` from above.
    """
    grid = f.grid
    total = 0.0
    for i in range(grid.dim):
        fwd = difference_matrix(grid, i, "forward") @ f.flat
        bwd = difference_matrix(grid, i, "backward") @ f.flat
        total += 0.5 * (fwd @ fwd + bwd @ bwd)
    return float(grid.cell_volume * total)


class CommutatorBound(NamedTuple):
    empirical_C: float
    ratios: list
    skipped: int


def gradient_norm(values: np.ndarray, grid: Grid) -> float:
    h = grid.spacing
    sq = sum(np.sum(central_diff(values, i, h) ** 2) for i in range(grid.dim))
    return float(np.sqrt(grid.cell_volume * sq))


def hessian_norm(values: np.ndarray, grid: Grid) -> float:
    """Frobenius L2 norm of the central-difference Hessian."""
    h = grid.spacing
    sq = 0.0
    for i in range(grid.dim):
        sq += np.sum(central_diff(values, i, h, 2) ** 2)
        for j in range(i + 1, grid.dim):
            mixed = central_diff(central_diff(values, i, h), j, h)
            sq += 2.0 * np.sum(mixed**2)
    return float(np.sqrt(grid.cell_volume * sq))


def check_commutator_bound(a: CoefficientField, grid: Grid,
                           functions: list[GridFunction]) -> CommutatorBound:
    """Max over ``functions`` of ``|[grad, A] f| / (|grad^2 f| + |grad f|)``."""
    if not functions:
        raise DomainError("commutator bound needs at least one function")
    comms = [commutator_grad_A(a, grid, i) for i in range(grid.dim)]
    ratios, skipped = [], 0
    for f in functions:
        denom = hessian_norm(f.values, grid) + gradient_norm(f.values, grid)
        if denom == 0.0:
            skipped += 1
            continue
        num = np.sqrt(sum(float(np.sum(C.apply(f.flat) ** 2)) for C in comms)
                      * grid.cell_volume)
        ratios.append(num / denom)
    emp = max(ratios) if ratios else float("nan")
    return CommutatorBound(float(emp), ratios, skipped)
