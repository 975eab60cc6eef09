from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pgdfit.linalg import ContractViolation, SingularSystem, direct_solve, is_symmetric
from pgdfit.mesh import (
    BoundaryCondition,
    InvalidGrid,
    assemble_stiffness,
    build_grid,
    edge_material,
    joule_rhs,
    stiffness_matrix,
    uniform_grid,
)


def rod_bc(grid, left=0.0, right=1.0):
    return BoundaryCondition.from_faces(grid, {(0, "min"): left, (0, "max"): right})


def test_build_grid_counts():
    g = build_grid([(0, 1, 2)])
    assert (g.dim, g.n_nodes, g.n_cells) == (1, 3, 2)
    assert np.array_equal(g.edge_lengths(), [1.0, 1.0])
    g2 = build_grid([(0, 1), (0, 2)])
    assert (g2.dim, g2.n_nodes, g2.n_cells) == (2, 4, 1)
    assert np.array_equal(g2.cell_volumes(), [2.0])


def test_fine_rod_grid():
    g = uniform_grid([(0.0, 2.0)], [200])
    assert g.n_cells == 200
    assert np.allclose(g.edge_lengths(), 0.01, rtol=1e-12)


@pytest.mark.parametrize("axes", [[(0, 0)], [(1, 0, 2)], [(0,)], [(0, 1)] * 4, [(0, np.nan)]])
def test_invalid_grids(axes):
    with pytest.raises(InvalidGrid):
        build_grid(axes)


def test_numbering_x_fastest():
    g = build_grid([(0, 1, 2), (0, 1)])
    xy = g.node_coordinates()
    assert np.array_equal(xy[:3, 0], [0, 1, 2]) and np.all(xy[:3, 1] == 0)
    assert g.node_index(1, 1) == 4


def test_counts_3d():
    g = uniform_grid([(0, 1)] * 3, [2, 3, 4])
    assert g.n_nodes == 3 * 4 * 5 and g.n_cells == 24
    assert g.n_edges == 2 * 4 * 5 + 3 * 3 * 5 + 4 * 3 * 4
    assert np.all(g.edge_lengths() > 0) and np.all(g.dual_areas() > 0) and np.all(g.cell_volumes() > 0)
    assert np.isclose(g.dual_volumes().sum(), 1.0, rtol=1e-14)


def test_stiffness_examples():
    g = build_grid([(0, 1, 2)])
    st_ = assemble_stiffness(g, [1.0, 1.0], rod_bc(g))
    assert np.allclose(st_.expand(direct_solve(st_.reduced, st_.lifting)), [0, 0.5, 1])
    mu = 0.2
    st_ = assemble_stiffness(g, [mu, 1.0], rod_bc(g))
    u = st_.expand(direct_solve(st_.reduced, st_.lifting))
    assert abs(u[1] - 1 / (1 + mu)) <= 1e-14
    a = stiffness_matrix(g, [0.3, 0.7]).toarray()
    assert np.array_equal(stiffness_matrix(g, [0.6, 1.4]).toarray(), 2 * a)


def test_stiffness_singular_component():
    g = build_grid([(0, 1, 2, 3)])
    # zero material isolates the right node from every Dirichlet node
    bc = BoundaryCondition(np.array([0]), np.array([0.0]))
    with pytest.raises(SingularSystem):
        assemble_stiffness(g, [1.0, 1.0, 0.0], bc)


def test_material_checks():
    g = build_grid([(0, 1, 2)])
    with pytest.raises(ContractViolation):
        stiffness_matrix(g, [1.0])
    with pytest.raises(ContractViolation):
        stiffness_matrix(g, [1.0, -1.0])


def test_edge_material_examples():
    g = build_grid([(0, 1, 2, 3)])
    assert np.allclose(edge_material(g, [2.5] * 3), 2.5)
    g = build_grid([(0, 1, 2)])
    assert np.array_equal(edge_material(g, [0.2, 1.0]), [0.2, 1.0])
    h = 0.25
    g3 = uniform_grid([(0, 1)] * 3, [4] * 3)
    c = 3.0
    ge = edge_material(g3, np.full(g3.n_cells, c))
    s, e = g3.edge_nodes()
    xyz = g3.node_coordinates()
    mid = 0.5 * (xyz[s] + xyz[e])
    interior = np.all((mid > 1e-12) & (mid < 1 - 1e-12), axis=1)
    assert interior.sum() > 0
    assert np.allclose(ge[interior], c * h, rtol=1e-14)


def test_harmonic_averaging_differs():
    g = uniform_grid([(0, 1), (0, 1)], [2, 2])
    m = np.array([1.0, 4.0, 1.0, 4.0])
    ar = edge_material(g, m, "arithmetic")
    hm = edge_material(g, m, "harmonic")
    assert np.all(hm <= ar + 1e-15) and np.any(hm < ar)
    with pytest.raises(ContractViolation):
        edge_material(g, m, "geometric")


def test_joule_examples():
    g = build_grid([(0, 1, 2)])
    assert np.array_equal(joule_rhs(g, [1.0, 1.0], np.full(3, 7.0), np.full(3, 7.0)), np.zeros(3))
    u = np.array([0.0, 0.5, 1.0])
    assert np.allclose(joule_rhs(g, [1.0, 1.0], u, u), [0.125, 0.25, 0.125], rtol=0, atol=1e-16)


@st.composite
def grid_and_fields(draw):
    dim = draw(st.integers(1, 3))
    cells = [draw(st.integers(1, 4)) for _ in range(dim)]
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    axes = [np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, n))]) for n in cells]
    g = build_grid(axes)
    m = rng.uniform(0.0, 2.0, g.n_cells)
    return g, m, rng.normal(size=g.n_nodes), rng.normal(size=g.n_nodes)


@given(grid_and_fields())
def test_power_conservation(case):
    g, m, u, v = case
    s = stiffness_matrix(g, m).to_scipy()
    total = joule_rhs(g, m, u, u).sum()
    ref = u @ (s @ u)
    assert abs(total - ref) <= 1e-12 * max(abs(ref), 1e-300)
    cross = joule_rhs(g, m, u, v).sum()
    assert abs(cross - u @ (s @ v)) <= 1e-12 * (np.sqrt(abs(ref) * abs(v @ (s @ v))) + 1e-300)


@given(grid_and_fields())
def test_joule_symmetric(case):
    g, m, u, v = case
    assert np.array_equal(joule_rhs(g, m, u, v), joule_rhs(g, m, v, u))


@given(grid_and_fields())
def test_stiffness_symmetric_nonneg_diagonal(case):
    g, m, _, _ = case
    s = stiffness_matrix(g, m)
    assert is_symmetric(s, exact=True)
    assert np.all(s.diagonal() >= 0)


@given(st.integers(1, 60), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_linear_data_nodally_exact(n, left, right, seed):
    rng = np.random.default_rng(seed)
    x = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 1.0, n))])
    g = build_grid([x])
    st_ = assemble_stiffness(g, np.full(n, 1.7), rod_bc(g, left, right))
    u = st_.expand(direct_solve(st_.reduced, st_.lifting))
    exact = left + (right - left) * x / x[-1]
    assert np.max(np.abs(u - exact)) <= 1e-12 * max(1.0, abs(left), abs(right))


def test_boundary_condition_duplicates():
    with pytest.raises(ContractViolation):
        BoundaryCondition(np.array([0, 0]), np.array([1.0, 2.0]))
