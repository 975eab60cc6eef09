from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pgdfit.electrothermal import (
    ElectrokineticProblem,
    SeparatedRhs,
    ThermalProblem,
    build_joule_source,
    solve_electric,
    solve_electrothermal,
    solve_thermal,
)
from pgdfit.engine import PgdConfig
from pgdfit.linalg import ContractViolation
from pgdfit.mesh import BoundaryCondition, stiffness_matrix, uniform_grid
from pgdfit.problems import block3d, model1d
from pgdfit.separated import ParameterAxis, SeparatedCoefficient, SeparatedSolution, SeparatedTerm


def plain_rod(n=20):
    grid = uniform_grid([(0.0, 2.0)], [n])
    ax = ParameterAxis.uniform(0.2, 1.0, 11, "mu_1")
    coeff = SeparatedCoefficient((SeparatedTerm(np.ones(n), (np.ones(ax.size),)),), (ax,))
    bc = BoundaryCondition.from_faces(grid, {(0, "min"): 0.0, (0, "max"): 1.0})
    return grid, coeff, bc


def test_parameter_independent_ramp():
    grid, coeff, bc = plain_rod()
    sol, rep = solve_electric(ElectrokineticProblem(grid, coeff, bc), PgdConfig())
    assert sol.n_modes <= 1
    for mu in (0.2, 0.55, 1.0):
        assert np.max(np.abs(sol.evaluate([mu]) - grid.axes[0] / 2)) <= 1e-10


def test_rod_potential_at_interface(rod, rod_result):
    phi = rod_result.electric.evaluate([0.2])
    node = int(np.argmin(np.abs(rod.grid.axes[0] - 1.0)))
    assert abs(phi[node] - 1 / 1.2) <= 2e-3


def test_converged_rod_potential_at_unit_mu(rod):
    sol, _ = solve_electric(ElectrokineticProblem(rod.grid, rod.sigma, rod.bc_electric), PgdConfig(tol_pgd=1e-9))
    assert np.max(np.abs(sol.evaluate([1.0]) - rod.grid.axes[0] / 2)) <= 1e-8


def test_dirichlet_values_exact(rod, rod_result):
    for sol, bc in ((rod_result.electric, rod.bc_electric), (rod_result.thermal, rod.bc_thermal)):
        for mu in (0.2, 0.37, 0.9, 1.0):
            assert np.array_equal(sol.evaluate([mu])[bc.nodes], bc.values)


def test_thermal_at_unit_mu(rod, rod_result):
    x = rod.grid.axes[0]
    t = rod_result.thermal.evaluate([1.0])
    assert np.max(np.abs(t - (20 + x * (2 - x) / 8))) <= 1e-3


def test_zero_source_constant_temperature():
    grid, coeff, _ = plain_rod()
    bc = BoundaryCondition.from_faces(grid, {(0, "min"): 20.0, (0, "max"): 20.0})
    sol, rep = solve_thermal(ThermalProblem(grid, coeff, bc), PgdConfig())
    assert sol.n_modes == 0
    assert np.allclose(sol.lift, 20.0, rtol=0, atol=1e-12)


def test_joule_source_zero_potential():
    grid, coeff, _ = plain_rod()
    empty = SeparatedSolution(coeff.axes, [], np.zeros(grid.n_nodes))
    assert build_joule_source(grid, empty, coeff).terms == []


def test_joule_source_linear_potential():
    grid, coeff, bc = plain_rod()
    sol, _ = solve_electric(ElectrokineticProblem(grid, coeff, bc), PgdConfig())
    src = build_joule_source(grid, sol, coeff)
    u = grid.axes[0] / 2
    s = stiffness_matrix(grid, np.ones(grid.n_cells)).to_scipy()
    for j in range(coeff.axes[0].size):
        total = src.at_index((j,), grid.n_nodes).sum()
        # sigma * (dphi/dx)^2 * length = 1 * (1/2)^2 * 2
        assert total == pytest.approx(0.5, rel=1e-12)
        assert total == pytest.approx(u @ (s @ u), rel=1e-12)


def test_joule_source_term_count(rod, rod_result):
    m = rod_result.electric.n_modes + 1
    assert len(rod_result.source.terms) <= rod.sigma.n_terms * m * (m + 1) // 2


def test_joule_source_nonnegative(rod, rod_result):
    for j in range(rod.axes[0].size):
        assert rod_result.source.at_index((j,), rod.grid.n_nodes).sum() >= -1e-12


def test_maximum_principle(rod, rod_result):
    for j in range(rod.axes[0].size):
        assert rod_result.thermal.evaluate_index((j,)).min() >= 20 - 1e-9


def test_cutoff_is_inert_by_default(rod, rod_result):
    src = build_joule_source(rod.grid, rod_result.electric, rod.sigma, cutoff=1e-14)
    assert len(src.terms) == len(rod_result.source.terms)


@given(st.floats(0.1, 10.0), st.integers(0, 2**31 - 1))
def test_one_directional_coupling(scale, seed):
    s = model1d(n_cells=30, n_mu=12)
    rng = np.random.default_rng(seed)
    cfg = PgdConfig()
    ref = solve_electrothermal(s.grid, s.sigma, s.lam, s.bc_electric, s.bc_thermal, cfg)
    terms = tuple(
        SeparatedTerm(t.spatial * scale * rng.uniform(0.5, 2.0, t.spatial.size), t.factors) for t in s.lam.terms
    )
    lam = SeparatedCoefficient(terms, s.lam.axes)
    other = solve_electrothermal(s.grid, s.sigma, lam, s.bc_electric, s.bc_thermal, cfg)
    assert other.electric_report == ref.electric_report
    assert np.array_equal(other.electric.lift, ref.electric.lift)
    for a, b in zip(ref.electric.modes, other.electric.modes):
        assert np.array_equal(a.spatial, b.spatial)
        assert all(np.array_equal(fa, fb) for fa, fb in zip(a.factors, b.factors))


def test_cg_matches_direct():
    s = block3d(n_cells=4, n_mu=4)
    cfg = PgdConfig(tol_pgd=1e-3)
    d, _ = solve_electric(ElectrokineticProblem(s.grid, s.sigma, s.bc_electric), cfg, method="direct")
    c, _ = solve_electric(ElectrokineticProblem(s.grid, s.sigma, s.bc_electric), cfg, method="cg")
    for idx in ((0, 0), (3, 1), (2, 3)):
        assert np.allclose(c.evaluate_index(idx), d.evaluate_index(idx), rtol=0, atol=1e-8)


def test_validation_errors():
    grid, coeff, bc = plain_rod()
    with pytest.raises(ContractViolation):
        solve_electric(ElectrokineticProblem(grid, coeff, BoundaryCondition(np.array([], int), np.array([]))), PgdConfig())
    bad = SeparatedCoefficient((SeparatedTerm(np.ones(grid.n_cells), (np.linspace(-1, 1, 11),)),), coeff.axes)
    with pytest.raises(ContractViolation):
        solve_electric(ElectrokineticProblem(grid, bad, bc), PgdConfig())
    src = SeparatedRhs(coeff.axes, [SeparatedTerm(np.ones(3), (np.ones(11),))])
    with pytest.raises(ContractViolation):
        solve_thermal(ThermalProblem(grid, coeff, bc, src), PgdConfig())
