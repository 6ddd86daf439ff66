"""Generalized moving least squares and direct meshless local Petrov-Galerkin methods."""
from .basis import MonomialBasis, dimension
from .errors import (
    ConfigurationError,
    ContainmentError,
    PetrovkitError,
    SolverError,
    UnisolvencyError,
    ZeroRowError,
)
from .geometry import NodeSet, Rectangle, fill_distance, generate_grid, radius_query, separation_distance
from .gmls import (
    CoefficientRow,
    Stencil,
    WeightFunction,
    build_stencil,
    gmls_derivative_row,
    mls_shape_gradients,
    mls_shape_values,
    solve_coefficients,
)
from .solver import DiscreteProblem, Solution, SparseSystem, assemble, assemble_mlpg5_reference, evaluate_solution, solve, solve_linear

__version__ = "0.1.0"

__all__ = [
    "CoefficientRow", "ConfigurationError", "ContainmentError", "DiscreteProblem", "MonomialBasis", "NodeSet",
    "PetrovkitError", "Rectangle", "Solution", "SolverError", "SparseSystem", "Stencil", "UnisolvencyError",
    "WeightFunction", "ZeroRowError", "assemble", "assemble_mlpg5_reference", "build_stencil", "dimension",
    "evaluate_solution", "fill_distance", "generate_grid", "gmls_derivative_row", "mls_shape_gradients",
    "mls_shape_values", "radius_query", "separation_distance", "solve", "solve_coefficients", "solve_linear",
]
