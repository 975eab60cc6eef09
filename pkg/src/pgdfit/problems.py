"""Ready-made problem instances: the 1D two-material rod and a 3D block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BoundaryCondition, TensorGrid, uniform_grid
from .separated import ParameterAxis, SeparatedCoefficient, SeparatedTerm


@dataclass
class ProblemSetup:
    grid: TensorGrid
    sigma: SeparatedCoefficient
    lam: SeparatedCoefficient
    bc_electric: BoundaryCondition
    bc_thermal: BoundaryCondition

    @property
    def axes(self):
        return self.sigma.axes


def model1d(
    n_cells: int = 200,
    n_mu: int = 100,
    mu_range: tuple[float, float] = (0.2, 1.0),
    length: float = 1.0,
    temperature: float = 20.0,
) -> ProblemSetup:
    """Rod on (0, 2L); both conductivities are mu on (0, L) and 1 on (L, 2L).

    Term 0 is the constant right half, term 1 the parameterized left half.

    Potential 0 and 1 at the ends, temperature fixed at both ends.
    """
    grid = uniform_grid([(0.0, 2.0 * length)], [n_cells])
    axis = ParameterAxis.uniform(*mu_range, n_mu, name="mu_1")
    left = grid.cells_in_box([(0.0, length)]).astype(float)
    right = 1.0 - left
    coeff = SeparatedCoefficient(
        (SeparatedTerm(right, (np.ones(axis.size),)), SeparatedTerm(left, (axis.points.copy(),))),
        (axis,),
    )
    ends = {(0, "min"): 0.0, (0, "max"): 1.0}
    bc_e = BoundaryCondition.from_faces(grid, ends)
    bc_t = BoundaryCondition.from_faces(grid, {(0, "min"): temperature, (0, "max"): temperature})
    return ProblemSetup(grid, coeff, coeff, bc_e, bc_t)


# bridge boxes of the block problem, in units of the block edge length
BRIDGES = (
    ((0.125, 0.875), (0.125, 0.375), (0.125, 0.375)),
    ((0.125, 0.875), (0.625, 0.875), (0.625, 0.875)),
)


def block3d(
    n_cells: int = 8,
    n_mu: int = 10,
    mu_range: tuple[float, float] = (1.0, 10.0),
    background: float = 1.0,
    size: float = 1.0,
    temperature: float = 20.0,
) -> ProblemSetup:
    """Cube with two conducting bars between the electrode faces x=0 and x=size.

    Bar ``p`` has conductivity ``mu_p``; the rest of the cube has
    ``background``.  Thermal conductivity follows the same pattern.
    """
    grid = uniform_grid([(0.0, size)] * 3, [n_cells] * 3)
    axes = tuple(ParameterAxis.uniform(*mu_range, n_mu, name=f"mu_{p + 1}") for p in range(2))
    masks = [grid.cells_in_box([(lo * size, hi * size) for lo, hi in box]).astype(float) for box in BRIDGES]
    rest = 1.0 - np.clip(masks[0] + masks[1], 0.0, 1.0)
    ones = np.ones(n_mu)
    terms = [SeparatedTerm(background * rest, (ones, ones))]
    terms.append(SeparatedTerm(masks[0], (axes[0].points.copy(), ones)))
    terms.append(SeparatedTerm(masks[1], (ones, axes[1].points.copy())))
    coeff = SeparatedCoefficient(tuple(terms), axes)
    bc_e = BoundaryCondition.from_faces(grid, {(0, "min"): 0.0, (0, "max"): 1.0})
    bc_t = BoundaryCondition.from_faces(grid, {(0, "min"): temperature, (0, "max"): temperature})
    return ProblemSetup(grid, coeff, coeff, bc_e, bc_t)
