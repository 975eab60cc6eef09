"""Electrokinetic and thermal subproblems on a FIT grid.

The coupling is one-way: the separated potential produces a separated
Joule-loss load for the thermal problem.  Both subproblems share the same
left-hand side structure and go through :func:`pgdfit.engine.enrich`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .engine import PgdConfig, PgdProblem, PgdReport, enrich
from .linalg import ContractViolation, SparseMatrix
from .mesh import BoundaryCondition, TensorGrid, check_solvable, joule_rhs, reduce_dirichlet, stiffness_matrix
from .separated import ParameterAxis, SeparatedCoefficient, SeparatedSolution, SeparatedTerm

LIFT_RULES = ("dirichlet", "harmonic")


class FitSpatialSolver:
    """Spatial solver over the per-term stiffness matrices of one coefficient.

    ``M_q`` is the FIT stiffness of the spatial factor of term ``q``.  The
    weighted sum is reduced to the free nodes and solved directly, or by
    Jacobi-preconditioned CG when ``method == "cg"``.
    """

    def __init__(
        self,
        grid: TensorGrid,
        coefficient: SeparatedCoefficient,
        bc: BoundaryCondition,
        averaging: str = "arithmetic",
        method: str = "direct",
        cg_tol: float = 1e-12,
    ):
        if method not in ("direct", "cg"):
            raise ContractViolation(f"unknown spatial solve method {method!r}")
        if bc.nodes.size == 0:
            raise ContractViolation("at least one Dirichlet node is required")
        self.grid = grid
        self.bc = bc
        self.method = method
        self.cg_tol = cg_tol
        self.matrices = [stiffness_matrix(grid, t.spatial, averaging) for t in coefficient.terms]
        self.n_terms = len(self.matrices)
        self.free = bc.free_nodes(grid.n_nodes)
        self._free_mask = np.zeros(grid.n_nodes, dtype=bool)
        self._free_mask[self.free] = True
        self._reduced = [m.submatrix(self.free, self.free) for m in self.matrices]
        self._dual = grid.dual_volumes()
        self.calls = 0

    def operator(self, weights: Sequence[float]) -> SparseMatrix:
        return linalg.linear_combination(weights, self._reduced)

    def solve(self, weights, rhs):
        self.calls += 1
        a = self.operator(weights)
        b = np.asarray(rhs, dtype=float)[self.free]
        if self.method == "cg":
            x = linalg.cg_solve(a, b, tol=self.cg_tol)
        else:
            x = linalg.direct_solve(a, b)
        out = np.zeros(self.grid.n_nodes)
        out[self.free] = x
        return out

    def apply(self, q, u):
        return linalg.spmv(self.matrices[q], u)

    def inner(self, q, u, v):
        return float(np.dot(u, linalg.spmv(self.matrices[q], v)))

    def load(self, u, f):
        return float(np.dot(u[self._free_mask], f[self._free_mask]))

    def norm(self, u):
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(np.dot(self._dual, u * u)))

    def lift(self, rule: str = "dirichlet") -> np.ndarray:
        """A nodal field carrying the Dirichlet data.

        ``dirichlet``: prescribed values on Dirichlet nodes, zero elsewhere.
        ``harmonic``: discrete harmonic extension for the operator with every
        parametric factor set to one.
        """
        g = self.bc.full_vector(self.grid.n_nodes)
        if rule == "dirichlet":
            return g
        if rule != "harmonic":
            raise ContractViolation(f"unknown lift rule {rule!r}")
        weights = [1.0] * self.n_terms
        rhs = -sum(self.apply(q, g) for q in range(self.n_terms))
        return g + self.solve(weights, rhs)


@dataclass
class SeparatedRhs:
    """Nodal load sum_t spatial_t(x) prod_p factor_{t,p}(mu_p)."""

    axes: tuple[ParameterAxis, ...]
    terms: list[SeparatedTerm] = field(default_factory=list)

    def at_index(self, index: Sequence[int], n_nodes: int) -> np.ndarray:
        out = np.zeros(n_nodes)
        for t in self.terms:
            c = 1.0
            for f, j in zip(t.factors, index):
                c *= f[j]
            out += c * t.spatial
        return out


@dataclass
class ElectrokineticProblem:
    grid: TensorGrid
    sigma: SeparatedCoefficient
    bc: BoundaryCondition
    averaging: str = "arithmetic"

    @property
    def axes(self) -> tuple[ParameterAxis, ...]:
        return self.sigma.axes

    def validate(self) -> None:
        _validate(self.grid, self.sigma, self.bc, self.averaging)


@dataclass
class ThermalProblem:
    grid: TensorGrid
    lam: SeparatedCoefficient
    bc: BoundaryCondition
    source: SeparatedRhs | None = None
    averaging: str = "arithmetic"

    @property
    def axes(self) -> tuple[ParameterAxis, ...]:
        return self.lam.axes

    def validate(self) -> None:
        _validate(self.grid, self.lam, self.bc, self.averaging)
        if self.source is not None:
            for t in self.source.terms:
                if t.spatial.shape != (self.grid.n_nodes,):
                    raise ContractViolation("source spatial factors must be nodal vectors")


def _validate(grid, coefficient, bc, averaging) -> None:
    if bc.nodes.size == 0:
        raise ContractViolation("at least one Dirichlet node is required")
    if coefficient.terms[0].spatial.shape != (grid.n_cells,):
        raise ContractViolation("coefficient spatial factors must be cell fields of the grid")
    if coefficient.min_value() <= 0.0:
        raise ContractViolation("coefficient must be positive on every cell and parameter point")
    check_solvable(grid, coefficient.mean(), bc, averaging)


def _solve(grid, coefficient, bc, averaging, sources, config, lift, method):
    solver = FitSpatialSolver(grid, coefficient, bc, averaging, method)
    lift_field = solver.lift(lift)
    problem = PgdProblem(
        solver=solver,
        axes=coefficient.axes,
        coeff_factors=[t.factors for t in coefficient.terms],
        sources=sources,
        lift=lift_field,
    )
    solution, report = enrich(problem, config)
    report.lift_solves = solver.calls - report.total_spatial_calls
    return solution, report


def solve_electric(
    problem: ElectrokineticProblem,
    config: PgdConfig,
    lift: str = "dirichlet",
    method: str = "direct",
) -> tuple[SeparatedSolution, PgdReport]:
    problem.validate()
    return _solve(problem.grid, problem.sigma, problem.bc, problem.averaging, [], config, lift, method)


def solve_thermal(
    problem: ThermalProblem,
    config: PgdConfig,
    lift: str = "harmonic",
    method: str = "direct",
) -> tuple[SeparatedSolution, PgdReport]:
    problem.validate()
    sources = list(problem.source.terms) if problem.source is not None else []
    return _solve(problem.grid, problem.lam, problem.bc, problem.averaging, sources, config, lift, method)


def build_joule_source(
    grid: TensorGrid,
    electric: SeparatedSolution,
    sigma: SeparatedCoefficient,
    averaging: str = "arithmetic",
    cutoff: float = 0.0,
) -> SeparatedRhs:
    """Separated Joule load from a separated potential.

    The lift enters as mode 0 with unit parametric factors.  Terms are
    emitted in lexicographic (q, i, j) order with ``i <= j``; off-diagonal
    pairs carry a factor 2.  With ``cutoff > 0``, terms whose factor-norm
    product is below ``cutoff`` times the largest are dropped.
    """
    axes = electric.axes
    modes = electric.all_modes()
    terms: list[SeparatedTerm] = []
    sizes: list[float] = []
    for q, term in enumerate(sigma.terms):
        for i in range(len(modes)):
            for j in range(i, len(modes)):
                spatial = joule_rhs(grid, term.spatial, modes[i].spatial, modes[j].spatial, averaging)
                if i != j:
                    spatial = 2.0 * spatial
                if not np.any(spatial):
                    continue
                factors = tuple(
                    sf * fi * fj for sf, fi, fj in zip(term.factors, modes[i].factors, modes[j].factors)
                )
                size = float(np.linalg.norm(spatial))
                for f, ax in zip(factors, axes):
                    size *= ax.norm(f)
                terms.append(SeparatedTerm(spatial, factors))
                sizes.append(size)
    if cutoff > 0.0 and terms:
        top = max(sizes)
        terms = [t for t, s in zip(terms, sizes) if s >= cutoff * top]
    return SeparatedRhs(axes, terms)


@dataclass
class ElectrothermalResult:
    electric: SeparatedSolution
    electric_report: PgdReport
    thermal: SeparatedSolution
    thermal_report: PgdReport
    source: SeparatedRhs


def solve_electrothermal(
    grid: TensorGrid,
    sigma: SeparatedCoefficient,
    lam: SeparatedCoefficient,
    bc_electric: BoundaryCondition,
    bc_thermal: BoundaryCondition,
    config: PgdConfig,
    averaging: str = "arithmetic",
    lift_electric: str = "dirichlet",
    lift_thermal: str = "harmonic",
    method: str = "direct",
    thermal_config: PgdConfig | None = None,
) -> ElectrothermalResult:
    """PGD potential, then its Joule load, then PGD temperature.

    ``thermal_config`` defaults to ``config``.
    """
    electric, erep = solve_electric(
        ElectrokineticProblem(grid, sigma, bc_electric, averaging), config, lift_electric, method
    )
    source = build_joule_source(grid, electric, sigma, averaging)
    thermal, trep = solve_thermal(
        ThermalProblem(grid, lam, bc_thermal, source, averaging), thermal_config or config, lift_thermal, method
    )
    return ElectrothermalResult(electric, erep, thermal, trep, source)
