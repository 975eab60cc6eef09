from __future__ import annotations

import numpy as np
import pytest

from pgdfit.linalg import direct_solve
from pgdfit.mesh import assemble_stiffness, uniform_grid
from pgdfit.oracle import (
    BudgetExceeded,
    InvalidParameter,
    analytic_1d_electric,
    analytic_1d_thermal,
    direct_electrothermal,
    full_sweep,
    parameter_indices,
    relative_l2_error_1d,
)
from pgdfit.problems import block3d, model1d
from pgdfit.separated import ParameterAxis, SeparatedCoefficient, SeparatedTerm


def rod_material(grid, mu, length=1.0):
    return np.where(grid.cell_centers()[:, 0] < length, mu, 1.0)


def test_electric_examples():
    x = np.linspace(0, 2, 9)
    assert np.allclose(analytic_1d_electric(x, 1.0), x / 2, rtol=0, atol=1e-15)
    assert analytic_1d_electric(1.0, 0.2) == pytest.approx(1 / 1.2, rel=1e-15)
    for mu in (0.2, 0.5, 3.0):
        assert analytic_1d_electric(0.0, mu) == 0.0
        assert analytic_1d_electric(2.0, mu) == pytest.approx(1.0, rel=1e-15)


def test_thermal_examples():
    x = np.linspace(0, 2, 41)
    assert np.allclose(analytic_1d_thermal(x, 1.0), 20 + x * (2 - x) / 8, rtol=0, atol=1e-14)
    assert analytic_1d_thermal(1.0, 1.0) == pytest.approx(20.125, rel=1e-15)
    for mu in (0.2, 0.6, 4.0):
        assert analytic_1d_thermal(0.0, mu) == 20.0
        assert analytic_1d_thermal(2.0, mu) == pytest.approx(20.0, abs=1e-13)
        assert np.all(analytic_1d_thermal(x, mu) >= 20.0)


def test_invalid_parameters():
    with pytest.raises(InvalidParameter):
        analytic_1d_electric(0.5, 0.0)
    with pytest.raises(InvalidParameter):
        analytic_1d_thermal(0.5, -1.0)
    with pytest.raises(InvalidParameter):
        analytic_1d_thermal(2.5, 1.0)


@pytest.mark.parametrize("mu", [0.2, 0.45, 1.0, 2.5])
def test_closed_forms_match_fine_fit(mu):
    grid = uniform_grid([(0.0, 2.0)], [10_000])
    s = model1d(n_cells=10_000, n_mu=2)
    phi, temp = direct_electrothermal(grid, rod_material(grid, mu), rod_material(grid, mu), s.bc_electric, s.bc_thermal)
    x = grid.axes[0]
    assert np.max(np.abs(phi - analytic_1d_electric(x, mu))) <= 1e-6
    assert np.max(np.abs(temp - analytic_1d_thermal(x, mu))) <= 1e-6
    assert abs(phi[5000] - 1 / (1 + mu)) <= 1e-6


def test_thermal_refinement_order():
    errs = []
    for n in (20, 40, 80, 160):
        s = model1d(n_cells=n, n_mu=2)
        grid = s.grid
        _, temp = direct_electrothermal(grid, rod_material(grid, 0.3), rod_material(grid, 0.3), s.bc_electric, s.bc_thermal)
        errs.append(relative_l2_error_1d(grid.axes[0], temp, lambda y: analytic_1d_thermal(y, 0.3)))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert min(ratios) >= 3.5


def test_sweep_matches_analytic_to_discretization_error():
    s = model1d()
    sweep = full_sweep(s.grid, s.sigma, s.bc_electric)
    assert sweep.count == 100
    x = s.grid.axes[0]
    for j, mu in enumerate(s.axes[0].points):
        assert np.max(np.abs(sweep.fields[j] - analytic_1d_electric(x, mu))) <= 1e-12
    # piecewise-linear potential with its kink on a node: the interpolant is exact
    for j in (0, 50, 99):
        mu = s.axes[0].points[j]
        assert relative_l2_error_1d(x, sweep.fields[j], lambda y: analytic_1d_electric(y, mu)) <= 1e-12


def test_sweep_single_point_bitwise():
    grid = uniform_grid([(0.0, 1.0)], [12])
    ax = ParameterAxis(np.array([0.7]))
    coeff = SeparatedCoefficient((SeparatedTerm(np.linspace(1, 2, 12), (np.array([0.7]),)),), (ax,))
    s = model1d(n_cells=12, n_mu=2)
    bc = s.bc_electric.__class__.from_faces(grid, {(0, "min"): 0.0, (0, "max"): 1.0})
    sweep = full_sweep(grid, coeff, bc)
    st_ = assemble_stiffness(grid, np.linspace(1, 2, 12) * 0.7, bc)
    ref = st_.expand(direct_solve(st_.reduced, st_.lifting))
    assert sweep.count == 1
    assert np.array_equal(sweep.fields[0], ref)


def test_block_sweep_count_and_bcs():
    s = block3d(n_cells=4)
    sweep = full_sweep(s.grid, s.sigma, s.bc_electric)
    assert sweep.count == 100
    assert sweep.indices[:2] == [(0, 0), (1, 0)]
    assert np.all(sweep.fields[:, s.bc_electric.nodes] == s.bc_electric.values)
    with pytest.raises(BudgetExceeded):
        full_sweep(s.grid, s.sigma, s.bc_electric, budget=99)


def test_parameter_indices_order():
    axes = (ParameterAxis.uniform(0, 1, 2), ParameterAxis.uniform(0, 1, 3))
    assert parameter_indices(axes) == [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (1, 2)]
