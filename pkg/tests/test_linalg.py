from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pgdfit.linalg import (
    ContractViolation,
    MaxIterations,
    SingularSystem,
    SparseMatrix,
    cg_solve,
    direct_solve,
    is_symmetric,
    linear_combination,
    spmv,
)


def test_spmv_small_cases():
    assert np.array_equal(spmv(SparseMatrix.identity(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    assert np.array_equal(spmv(SparseMatrix.tridiag(-1, 2, -1, 3), np.ones(3)), [1.0, 0.0, 1.0])
    zero = SparseMatrix.from_dense(np.zeros((2, 3)))
    assert np.array_equal(spmv(zero, [4.0, 5.0, 6.0]), [0.0, 0.0])


def test_spmv_dimension_mismatch():
    with pytest.raises(ContractViolation):
        spmv(SparseMatrix.identity(3), np.ones(4))


def test_unsorted_columns_rejected():
    with pytest.raises(ContractViolation):
        SparseMatrix(1, 2, np.array([0, 2]), np.array([1, 0]), np.array([1.0, 1.0]))


def test_direct_solve_examples():
    assert np.allclose(direct_solve(SparseMatrix.identity(4), [1, 2, 3, 4]), [1, 2, 3, 4], rtol=0, atol=1e-15)
    # hand elimination of the 3x3 second-difference matrix
    x = direct_solve(SparseMatrix.tridiag(-1, 2, -1, 3), [1.0, 0.0, 0.0])
    assert np.allclose(x, [0.75, 0.5, 0.25], rtol=0, atol=1e-15)
    assert np.allclose(direct_solve(SparseMatrix.from_dense(np.diag([2.0, 4.0])), [2, 8]), [1, 2])


def test_direct_solve_residual():
    a = SparseMatrix.tridiag(-1, 2.5, -1, 40)
    b = np.linspace(-1, 1, 40)
    x = direct_solve(a, b)
    assert np.linalg.norm(spmv(a, x) - b) <= 1e-12 * np.linalg.norm(b)


def test_direct_solve_singular():
    with pytest.raises(SingularSystem):
        direct_solve(SparseMatrix.from_dense([[1.0, 1.0], [1.0, 1.0]]), [1.0, 2.0])


def test_cg_examples():
    a = SparseMatrix.tridiag(-1, 2, -1, 50)
    assert np.array_equal(cg_solve(a, np.zeros(50)), np.zeros(50))
    b = np.random.default_rng(0).normal(size=7)
    assert np.allclose(cg_solve(SparseMatrix.identity(7), b), b, rtol=0, atol=1e-15)
    x = cg_solve(a, np.ones(50))
    assert np.max(np.abs(x - direct_solve(a, np.ones(50)))) <= 1e-10 * np.max(np.abs(x))


def test_cg_max_iterations_carries_trace():
    a = SparseMatrix.tridiag(-1, 2, -1, 200)
    with pytest.raises(MaxIterations) as info:
        cg_solve(a, np.ones(200), max_iter=3)
    assert len(info.value.trace) == 4


def test_linear_combination_and_symmetry():
    a = SparseMatrix.tridiag(-1, 2, -1, 5)
    b = SparseMatrix.identity(5)
    c = linear_combination([2.0, 3.0], [a, b])
    assert np.array_equal(c.toarray(), 2 * a.toarray() + 3 * np.eye(5))
    assert is_symmetric(c)
    assert not is_symmetric(SparseMatrix.from_dense([[1.0, 2.0], [0.0, 1.0]]))


@st.composite
def spd_tridiag(draw):
    n = draw(st.integers(2, 100))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    off = rng.uniform(-1.0, 1.0, n - 1)
    diag = np.abs(np.concatenate([[0.0], off])) + np.abs(np.concatenate([off, [0.0]])) + rng.uniform(0.1, 2.0, n)
    dense = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return SparseMatrix.from_dense(dense), rng.normal(size=n)


@given(spd_tridiag())
def test_cg_matches_direct(case):
    a, b = case
    ref = direct_solve(a, b)
    assert np.max(np.abs(cg_solve(a, b) - ref)) <= 1e-8 * np.max(np.abs(ref))


@given(spd_tridiag(), st.floats(-10, 10), st.floats(-10, 10))
def test_spmv_linear(case, alpha, beta):
    a, x = case
    y = np.cos(np.arange(x.size))
    lhs = spmv(a, alpha * x + beta * y)
    rhs = alpha * spmv(a, x) + beta * spmv(a, y)
    scale = np.max(np.abs(a.toarray())) * (abs(alpha) * np.max(np.abs(x)) + abs(beta)) * 3
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * max(scale, 1e-300)
