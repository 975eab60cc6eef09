"""Proper generalized decomposition for parameterized electrothermal FIT models."""

from .engine import PgdConfig, PgdReport, enrich
from .electrothermal import solve_electric, solve_electrothermal, solve_thermal
from .mesh import BoundaryCondition, TensorGrid, build_grid, uniform_grid
from .separated import ParameterAxis, SeparatedCoefficient, SeparatedSolution, SeparatedTerm

__all__ = [
    "BoundaryCondition",
    "ParameterAxis",
    "PgdConfig",
    "PgdReport",
    "SeparatedCoefficient",
    "SeparatedSolution",
    "SeparatedTerm",
    "TensorGrid",
    "build_grid",
    "enrich",
    "solve_electric",
    "solve_electrothermal",
    "solve_thermal",
    "uniform_grid",
]
