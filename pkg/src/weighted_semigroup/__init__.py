"""Finite-difference checks of weighted Sobolev estimates for divergence-form heat semigroups."""

from .elliptic import CoefficientField, DiscreteOperator, assemble_A, coefficient_field
from .errors import (ConfigError, DataError, DomainError, EllipticityError,
                     InsufficientDataError, RangeError, ResolutionError,
                     ResolutionWarning, SolverError)
from .estimates import Ensemble, EstimateReport, Problem, run_suite
from .grid import Grid, GridFunction
from .norms import NormSpec, sobolev_norm
from .weights import Weight

__all__ = [
    "CoefficientField", "DiscreteOperator", "assemble_A", "coefficient_field",
    "ConfigError", "DataError", "DomainError", "EllipticityError", "InsufficientDataError",
    "RangeError", "ResolutionError", "ResolutionWarning", "SolverError",
    "Ensemble", "EstimateReport", "Problem", "run_suite",
    "Grid", "GridFunction", "NormSpec", "sobolev_norm", "Weight",
]
