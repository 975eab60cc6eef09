"""Reference solutions: closed forms for the 1D rod and brute-force sweeps."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .linalg import direct_solve
from .mesh import BoundaryCondition, TensorGrid, assemble_stiffness, joule_rhs
from .separated import ParameterAxis, SeparatedCoefficient


class InvalidParameter(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


def _check(x, mu, length):
    if not mu > 0:
        raise InvalidParameter(f"mu must be positive, got {mu}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 2 * length):
        raise InvalidParameter("x outside [0, 2L]")
    return x


def analytic_1d_electric(x, mu: float, length: float = 1.0):
    """Potential of the two-material rod with phi(0)=0, phi(2L)=1."""
    x = _check(x, mu, length)
    left = x / (length * (1 + mu))
    right = mu / (length * (1 + mu)) * (x - length) + 1 / (1 + mu)
    return np.where(x <= length, left, right)


def analytic_1d_thermal(x, mu: float, length: float = 1.0, t_end: float = 20.0):
    """Temperature of the rod heated by its own Joule losses, T = t_end at both ends.

    Lambda equals sigma: mu on (0, L), 1 on (L, 2L).  The source is constant
    on each half, so T is a parabola on each half, glued by continuity of T
    and of the heat flux at x = L.
    """
    x = _check(x, mu, length)
    L = length
    s_left = mu / (L * (1 + mu)) ** 2
    s_right = mu**2 / (L * (1 + mu)) ** 2
    slope_left = L * (0.5 * s_right + s_left + 0.5 * s_left / mu) / (1 + mu)
    slope_right = (s_right + s_left) * L - mu * slope_left
    y = 2 * L - x
    left = t_end + slope_left * x - 0.5 * s_left / mu * x**2
    right = t_end + slope_right * y - 0.5 * s_right * y**2
    return np.where(x <= L, left, right)


@dataclass
class FullSweepSolution:
    axes: tuple[ParameterAxis, ...]
    indices: list[tuple[int, ...]]
    fields: np.ndarray  # (n_points, n_nodes), lexicographic over axes, first axis fastest

    @property
    def count(self) -> int:
        return len(self.indices)

    def at_index(self, index) -> np.ndarray:
        return self.fields[self.indices.index(tuple(index))]


def parameter_indices(axes) -> list[tuple[int, ...]]:
    """All collocation index tuples, first axis varying fastest."""
    ranges = [range(ax.size) for ax in axes]
    return [tuple(reversed(t)) for t in itertools.product(*reversed(ranges))]


def full_sweep(
    grid: TensorGrid,
    coefficient: SeparatedCoefficient,
    bc: BoundaryCondition,
    budget: int = 10_000,
    source=None,
    averaging: str = "arithmetic",
) -> FullSweepSolution:
    """One direct FIT solve per collocation tuple.

    ``source``, when given, is a callable ``index -> nodal load``.
    """
    axes = coefficient.axes
    total = int(np.prod([ax.size for ax in axes])) if axes else 1
    if total > budget:
        raise BudgetExceeded(f"sweep needs {total} solves, budget is {budget}")
    indices = parameter_indices(axes)
    out = np.zeros((len(indices), grid.n_nodes))
    for row, idx in enumerate(indices):
        material = coefficient.at_index(idx)
        st = assemble_stiffness(grid, material, bc, averaging)
        rhs = st.lifting.copy()
        if source is not None:
            rhs += source(idx)[st.free]
        out[row] = st.expand(direct_solve(st.reduced, rhs))
    return FullSweepSolution(axes, indices, out)


def relative_l2_error_1d(x, nodal, exact, n_gauss: int = 5) -> float:
    """Relative L2(0, x[-1]) error of the piecewise-linear interpolant of ``nodal``.

    ``exact`` is a callable of position.  Integrals use Gauss-Legendre
    quadrature on every cell.
    """
    x = np.asarray(x, dtype=float)
    g, w = np.polynomial.legendre.leggauss(n_gauss)
    h = np.diff(x)
    xq = 0.5 * (x[:-1] + x[1:])[:, None] + 0.5 * h[:, None] * g[None, :]
    wq = 0.5 * h[:, None] * w[None, :]
    ref = exact(np.clip(xq, x[0], x[-1]))
    approx = np.interp(xq, x, nodal)
    return float(np.sqrt(np.sum(wq * (approx - ref) ** 2) / np.sum(wq * ref**2)))


def direct_electrothermal(grid, sigma_cells, lam_cells, bc_electric, bc_thermal, averaging="arithmetic"):
    """Plain FIT solve of the coupled problem for one material configuration."""
    st = assemble_stiffness(grid, sigma_cells, bc_electric, averaging)
    phi = st.expand(direct_solve(st.reduced, st.lifting))
    q = joule_rhs(grid, sigma_cells, phi, phi, averaging)
    tt = assemble_stiffness(grid, lam_cells, bc_thermal, averaging)
    temp = tt.expand(direct_solve(tt.reduced, tt.lifting + q[tt.free]))
    return phi, temp


def sweep_electrothermal(setup, budget: int = 10_000, averaging: str = "arithmetic"):
    """Full sweeps of potential and temperature over the collocation grid."""
    axes = setup.sigma.axes
    total = int(np.prod([ax.size for ax in axes])) if axes else 1
    if total > budget:
        raise BudgetExceeded(f"sweep needs {total} solves, budget is {budget}")
    indices = parameter_indices(axes)
    phis = np.zeros((len(indices), setup.grid.n_nodes))
    temps = np.zeros_like(phis)
    for row, idx in enumerate(indices):
        phis[row], temps[row] = direct_electrothermal(
            setup.grid,
            setup.sigma.at_index(idx),
            setup.lam.at_index(idx),
            setup.bc_electric,
            setup.bc_thermal,
            averaging,
        )
    return FullSweepSolution(axes, indices, phis), FullSweepSolution(axes, indices, temps)


def surrogate_errors(solution, sweep: FullSweepSolution, grid) -> tuple[float, float]:
    """(full-grid relative error, max over parameter points of the relative error).

    The full-grid error is weighted by dual volumes in space and quadrature
    weights along each parameter axis.
    """
    dual = grid.dual_volumes()
    num = den = 0.0
    worst = 0.0
    for row, idx in enumerate(sweep.indices):
        w = 1.0
        for ax, j in zip(sweep.axes, idx):
            w *= ax.weights[j]
        ref = sweep.fields[row]
        e = solution.evaluate_index(idx) - ref
        ee = float(np.dot(dual, e * e))
        rr = float(np.dot(dual, ref * ref))
        num += w * ee
        den += w * rr
        worst = max(worst, np.sqrt(ee / rr) if rr > 0 else np.sqrt(ee))
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num)), float(worst)
