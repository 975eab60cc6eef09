"""Greedy PGD enrichment with an alternating-direction fixed point.

Direction 0 is space and is handled by a :class:`SpatialSolver`; the
remaining directions are parameter axes whose steps are pointwise solves
on the collocation grid.  The lift (when present) takes part in every sum
as a frozen mode with all parametric factors equal to one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .linalg import ContractViolation, SingularSystem
from .separated import (
    Mode,
    ParameterAxis,
    SeparatedSolution,
    SeparatedTerm,
    ZeroMode,
    normalize_mode,
    weighted_inner,
)

log = logging.getLogger(__name__)


class DegenerateCoefficient(ArithmeticError):
    pass


class EmptyProblem(ValueError):
    pass


class SpatialSolver(Protocol):
    """What the PGD driver needs from a spatial field solver.

    Vectors are full nodal vectors.  Solutions of :meth:`solve` vanish on
    Dirichlet nodes.
    """

    n_terms: int

    def solve(self, weights: Sequence[float], rhs: np.ndarray) -> np.ndarray:
        """Solve ``sum_q weights[q] M_q u = rhs`` on the free nodes."""

    def apply(self, q: int, u: np.ndarray) -> np.ndarray:
        """Return ``M_q u``."""

    def inner(self, q: int, u: np.ndarray, v: np.ndarray) -> float:
        """Return ``u^T M_q v``."""

    def load(self, u: np.ndarray, f: np.ndarray) -> float:
        """Return ``u^T f`` for a nodal load ``f`` (free nodes only)."""

    def norm(self, u: np.ndarray) -> float:
        """Discrete L2 norm of a nodal vector."""


@dataclass(frozen=True)
class PgdConfig:
    tol_fp: float = 1e-7
    tol_pgd: float = 1e-2
    max_modes: int = 50
    max_fp_iters: int = 100
    # a mode smaller than null_tol * |u^1| is treated as the zero mode
    null_tol: float = 1e-12
    # parameter directions (1-based) in the order they follow the spatial step
    sweep_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0 < self.tol_fp < 1:
            raise ContractViolation("tol_fp must lie in (0, 1)")
        if not self.tol_pgd > 0:
            raise ContractViolation("tol_pgd must be positive")
        if self.max_modes < 1 or self.max_fp_iters < 1:
            raise ContractViolation("max_modes and max_fp_iters must be at least 1")

    def order(self, n_axes: int) -> tuple[int, ...]:
        if self.sweep_order is None:
            return tuple(range(1, n_axes + 1))
        if sorted(self.sweep_order) != list(range(1, n_axes + 1)):
            raise ContractViolation(f"sweep_order must be a permutation of 1..{n_axes}")
        return tuple(self.sweep_order)


@dataclass
class ModeReport:
    index: int
    magnitude: float = 0.0
    fp_iterations: int = 0
    spatial_calls: int = 0
    deltas: list[float] = field(default_factory=list)
    deltas_rel: list[float] = field(default_factory=list)
    converged: bool = False


@dataclass
class PgdReport:
    modes: list[ModeReport] = field(default_factory=list)
    stop_reason: str = ""
    # the attempt that produced a null mode, if any
    rejected: ModeReport | None = None
    # solves spent outside enrichment, e.g. on the lift
    lift_solves: int = 0

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def total_spatial_calls(self) -> int:
        calls = sum(m.spatial_calls for m in self.modes)
        if self.rejected is not None:
            calls += self.rejected.spatial_calls
        return calls

    @property
    def magnitudes(self) -> list[float]:
        return [m.magnitude for m in self.modes]


@dataclass
class PgdProblem:
    """Everything the driver needs: operator factors, loads, lift, axes.

    ``coeff_factors[q][p]`` is the factor of coefficient term ``q`` along
    parameter axis ``p``.  ``sources`` are rank-one load terms whose spatial
    part is a nodal vector.
    """

    solver: SpatialSolver
    axes: tuple[ParameterAxis, ...]
    coeff_factors: list[tuple[np.ndarray, ...]]
    sources: list[SeparatedTerm] = field(default_factory=list)
    lift: np.ndarray | None = None

    def __post_init__(self):
        self.axes = tuple(self.axes)
        if len(self.coeff_factors) != self.solver.n_terms:
            raise ContractViolation("one factor tuple per operator term is required")


class AlphaTable:
    """Scalar products of mode factors, one symmetric matrix per (term, direction).

    Direction 0 holds the spatial products ``u_i^T M_q u_j``; direction
    ``p >= 1`` holds ``sum_j w_j c_{q,p,j} u_{p,j}^i u_{p,j}^k``.  Source
    projections ``beta[t][p][i]`` are kept alongside.
    """

    def __init__(self, n_terms: int, n_dirs: int, n_sources: int, capacity: int):
        self.alpha = np.zeros((n_terms, n_dirs, capacity, capacity))
        self.beta = np.zeros((n_sources, n_dirs, capacity))

    def grow(self, capacity: int) -> None:
        q, d, c, _ = self.alpha.shape
        if capacity <= c:
            return
        a = np.zeros((q, d, capacity, capacity))
        a[:, :, :c, :c] = self.alpha
        b = np.zeros((self.beta.shape[0], d, capacity))
        b[:, :, :c] = self.beta
        self.alpha, self.beta = a, b

    def row_product(self, q: int, m: int, s: int, skip: int) -> float:
        """prod over directions other than ``skip`` of alpha[q, p, m, s]."""
        vals = np.delete(self.alpha[q, :, m, s], skip)
        return float(np.prod(vals))

    def beta_product(self, t: int, m: int, skip: int) -> float:
        return float(np.prod(np.delete(self.beta[t, :, m], skip)))


def update_alpha(
    table: AlphaTable,
    problem: PgdProblem,
    modes: Sequence[Mode],
    m: int,
    direction: int,
) -> None:
    """Refresh every entry that involves mode ``m`` along ``direction``."""
    cur = modes[m]
    if direction == 0:
        for q in range(problem.solver.n_terms):
            mu = problem.solver.apply(q, cur.spatial)
            for s, other in enumerate(modes):
                v = float(np.dot(other.spatial, mu)) if s != m else problem.solver.inner(q, cur.spatial, cur.spatial)
                table.alpha[q, 0, m, s] = v
                table.alpha[q, 0, s, m] = v
        for t, src in enumerate(problem.sources):
            table.beta[t, 0, m] = problem.solver.load(cur.spatial, src.spatial)
        return
    p = direction - 1
    ax = problem.axes[p]
    for q, factors in enumerate(problem.coeff_factors):
        for s, other in enumerate(modes):
            v = weighted_inner(ax, factors[p], cur.factors[p], other.factors[p])
            table.alpha[q, direction, m, s] = v
            table.alpha[q, direction, s, m] = v
    for t, src in enumerate(problem.sources):
        table.beta[t, direction, m] = weighted_inner(ax, np.ones(ax.size), src.factors[p], cur.factors[p])


def spatial_step(problem: PgdProblem, table: AlphaTable, modes: Sequence[Mode], m: int) -> np.ndarray:
    """Solve for the spatial factor of mode ``m`` with its parametric factors frozen."""
    solver = problem.solver
    weights = [table.row_product(q, m, m, skip=0) for q in range(solver.n_terms)]
    if not any(weights):
        raise ZeroMode("all operator weights vanished")
    rhs = np.zeros_like(modes[m].spatial)
    for t, src in enumerate(problem.sources):
        c = table.beta_product(t, m, skip=0)
        if c:
            rhs += c * src.spatial
    for q in range(solver.n_terms):
        acc = np.zeros_like(rhs)
        for s in range(m):
            c = table.row_product(q, m, s, skip=0)
            if c:
                acc += c * modes[s].spatial
        if np.any(acc):
            rhs -= solver.apply(q, acc)
    try:
        return solver.solve(weights, rhs)
    except SingularSystem as exc:
        raise ZeroMode(str(exc)) from exc


def parametric_step(problem: PgdProblem, table: AlphaTable, modes: Sequence[Mode], m: int, direction: int) -> np.ndarray:
    """Pointwise collocation solve for the factor of mode ``m`` along ``direction``.

    The parametric mass matrices are diagonal with the same quadrature
    weight on both sides of each row, so the weights cancel.
    """
    p = direction - 1
    n = problem.axes[p].size
    num = np.zeros(n)
    den = np.zeros(n)
    for t, src in enumerate(problem.sources):
        d = table.beta_product(t, m, skip=direction)
        num += d * src.factors[p]
    for q, factors in enumerate(problem.coeff_factors):
        coeff = factors[p]
        acc = np.zeros(n)
        for s in range(m):
            c = table.row_product(q, m, s, skip=direction)
            acc += c * modes[s].factors[p]
        num -= coeff * acc
        den += table.row_product(q, m, m, skip=direction) * coeff
    if np.any(den == 0.0) or not np.all(np.isfinite(den)):
        raise DegenerateCoefficient(f"zero operator weight at a collocation point of axis {problem.axes[p].name}")
    return num / den


def _unit_factor(ax: ParameterAxis) -> np.ndarray:
    return np.ones(ax.size) / np.sqrt(ax.weights.sum())


def fixed_point(
    problem: PgdProblem,
    table: AlphaTable,
    modes: list[Mode],
    m: int,
    config: PgdConfig,
    report: ModeReport,
    reference: float | None = None,
) -> Mode:
    """Compute mode ``m`` (``modes[:m]`` frozen); ``modes[m]`` is overwritten in place."""
    axes = problem.axes
    order = config.order(len(axes))
    norm = problem.solver.norm
    for d in range(len(axes) + 1):
        update_alpha(table, problem, modes, m, d)

    for k in range(1, config.max_fp_iters + 1):
        prev = modes[m]
        report.spatial_calls += 1
        spatial = spatial_step(problem, table, modes, m)
        if not np.any(spatial):
            raise ZeroMode("spatial step returned the zero vector")
        if reference is not None:
            size = norm(spatial)
            for p, ax in enumerate(axes):
                size *= ax.norm(prev.factors[p])
            if size <= config.null_tol * reference:
                report.magnitude = size
                raise ZeroMode(f"mode is at round-off level ({size:.3e})")
        modes[m] = Mode(spatial, prev.factors)
        update_alpha(table, problem, modes, m, 0)
        for d in order:
            factor = parametric_step(problem, table, modes, m, d)
            factors = list(modes[m].factors)
            factors[d - 1] = factor
            normed, _ = normalize_mode(Mode(modes[m].spatial, tuple(factors)), axes, norm)
            modes[m] = normed
            update_alpha(table, problem, modes, m, d)
            update_alpha(table, problem, modes, m, 0)
        cur = modes[m]
        delta = norm(cur.spatial - prev.spatial)
        size = norm(cur.spatial)
        for p, ax in enumerate(axes):
            delta *= ax.norm(cur.factors[p] - prev.factors[p])
            size *= ax.norm(cur.factors[p])
        rel = delta / size if size > 0 else np.inf
        report.deltas.append(float(delta))
        report.deltas_rel.append(float(rel))
        report.fp_iterations = k
        if not axes or rel <= config.tol_fp:
            report.converged = True
            break
    if not report.converged:
        log.warning("mode %d: fixed point stopped after %d iterations (rel. change %.3e)", m, k, rel)
    return modes[m]


def enrich(problem: PgdProblem, config: PgdConfig) -> tuple[SeparatedSolution, PgdReport]:
    """Add modes greedily until ``|u^m| / |u^1| <= tol_pgd`` or a null mode appears."""
    axes = problem.axes
    solver = problem.solver
    norm = solver.norm
    report = PgdReport()
    lift = problem.lift
    n_nodes = None
    if lift is not None:
        n_nodes = lift.size
    elif problem.sources:
        n_nodes = problem.sources[0].spatial.size
    if n_nodes is None:
        raise EmptyProblem("problem has neither a lift nor sources")

    frozen: list[Mode] = []
    if lift is not None:
        frozen.append(Mode(lift, tuple(np.ones(ax.size) for ax in axes)))
    offset = len(frozen)
    n_dirs = len(axes) + 1
    table = AlphaTable(solver.n_terms, n_dirs, len(problem.sources), offset + config.max_modes + 1)
    if lift is not None:
        for d in range(n_dirs):
            update_alpha(table, problem, frozen, 0, d)

    solution = SeparatedSolution(axes, [], lift, n_nodes)
    first = None
    # round-off is judged against the largest known field: the lift, then mode 1
    lift_size = 0.0
    if lift is not None:
        lift_size = norm(lift) * float(np.prod([np.sqrt(ax.weights.sum()) for ax in axes]))
    for count in range(1, config.max_modes + 1):
        m = offset + count - 1
        work = frozen + [Mode(np.zeros(n_nodes), tuple(_unit_factor(ax) for ax in axes))]
        mrep = ModeReport(index=count)
        try:
            reference = max(first or 0.0, lift_size) or None
            mode = fixed_point(problem, table, work, m, config, mrep, reference)
        except ZeroMode as exc:
            report.stop_reason = "empty" if count == 1 else "zero-mode"
            report.rejected = mrep
            log.info("enrichment stopped at mode %d: %s", count, exc)
            break
        magnitude = norm(mode.spatial)
        mrep.magnitude = magnitude
        report.modes.append(mrep)
        frozen.append(mode)
        solution.modes.append(mode)
        if first is None:
            first = magnitude
        log.debug("mode %d: magnitude %.3e after %d iterations", count, magnitude, mrep.fp_iterations)
        if magnitude / first <= config.tol_pgd:
            report.stop_reason = "tolerance"
            break
    else:
        report.stop_reason = "max-modes"
    return solution, report
