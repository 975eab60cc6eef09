"""Sparse matrices and the linear solvers used by the spatial steps.

Matrices are stored in compressed-row form with sorted column indices.
Products go through :mod:`scipy.sparse`, which sums each row left to
right; the direct solver is SuperLU.  The conjugate gradient solver is
implemented here with a Jacobi preconditioner.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ContractViolation(ValueError):
    """Raised when operands have incompatible shapes or violate a precondition."""


class SingularSystem(ArithmeticError):
    """Raised when a linear system has no unique solution."""


class MaxIterations(RuntimeError):
    """Raised when an iterative solver does not reach its tolerance."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable CSR matrix.

    ``indptr``, ``indices`` and ``data`` follow the usual CSR layout.  Column
    indices are strictly increasing within each row.
    """

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    _csr: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        data = np.asarray(self.data, dtype=float)
        if indptr.shape != (self.n_rows + 1,) or indices.shape != data.shape:
            raise ContractViolation("inconsistent CSR arrays")
        for arr in (indptr, indices, data):
            arr.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", data)
        csr = sp.csr_matrix((data, indices, indptr), shape=(self.n_rows, self.n_cols))
        object.__setattr__(self, "_csr", csr)
        if not csr.has_sorted_indices or not _strictly_increasing_rows(indptr, indices):
            raise ContractViolation("column indices must be strictly increasing within each row")

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape: tuple[int, int]) -> "SparseMatrix":
        """Build from coordinate triplets; duplicate entries are summed."""
        coo = sp.coo_matrix(
            (np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))), shape=shape
        )
        return cls.from_scipy(coo)

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        csr = sp.csr_matrix(mat, dtype=float)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        return cls.from_scipy(sp.csr_matrix(np.asarray(a, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls.from_scipy(sp.identity(n, format="csr"))

    @classmethod
    def tridiag(cls, lower: float, diag: float, upper: float, n: int) -> "SparseMatrix":
        return cls.from_scipy(sp.diags([lower, diag, upper], [-1, 0, 1], shape=(n, n)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def scaled(self, c: float) -> "SparseMatrix":
        return SparseMatrix(self.n_rows, self.n_cols, self.indptr, self.indices, c * self.data)

    def submatrix(self, rows: np.ndarray, cols: np.ndarray) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self._csr[rows][:, cols])

    def __matmul__(self, x):
        return spmv(self, x)


def _strictly_increasing_rows(indptr: np.ndarray, indices: np.ndarray) -> bool:
    if indices.size < 2:
        return True
    steps = np.diff(indices)
    # positions where a new row starts do not need to increase
    row_start = np.zeros(indices.size - 1, dtype=bool)
    starts = indptr[1:-1]
    starts = starts[(starts > 0) & (starts < indices.size)]
    row_start[starts - 1] = True
    return bool(np.all((steps > 0) | row_start))


def linear_combination(weights: Sequence[float], mats: Sequence[SparseMatrix]) -> SparseMatrix:
    """Return ``sum_q weights[q] * mats[q]``."""
    if len(weights) != len(mats) or not mats:
        raise ContractViolation("need one weight per matrix")
    acc = mats[0].to_scipy() * float(weights[0])
    for w, m in zip(weights[1:], mats[1:]):
        if m.shape != mats[0].shape:
            raise ContractViolation("matrix shapes differ")
        acc = acc + m.to_scipy() * float(w)
    return SparseMatrix.from_scipy(acc)


def is_symmetric(a: SparseMatrix, *, exact: bool = True, rtol: float = 0.0) -> bool:
    """Check structural and numerical symmetry."""
    if a.n_rows != a.n_cols:
        return False
    m = a.to_scipy()
    t = m.T.tocsr()
    t.sort_indices()
    if not (np.array_equal(m.indptr, t.indptr) and np.array_equal(m.indices, t.indices)):
        return False
    if exact:
        return bool(np.array_equal(m.data, t.data))
    scale = np.max(np.abs(m.data)) if m.nnz else 0.0
    return bool(np.all(np.abs(m.data - t.data) <= rtol * scale))


def spmv(a: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != a.n_cols:
        raise ContractViolation(f"spmv: matrix has {a.n_cols} columns, vector has {x.shape}")
    return a.to_scipy() @ x


def _check_square(a: SparseMatrix, b: np.ndarray) -> None:
    if a.n_rows != a.n_cols:
        raise ContractViolation("matrix must be square")
    if b.ndim != 1 or b.shape[0] != a.n_rows:
        raise ContractViolation(f"rhs length {b.shape} does not match matrix size {a.n_rows}")


def direct_solve(a: SparseMatrix, b) -> np.ndarray:
    """Sparse LU solve; raises :class:`SingularSystem` on a zero pivot."""
    b = np.asarray(b, dtype=float)
    _check_square(a, b)
    if a.n_rows == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(a.to_scipy().tocsc())
    except RuntimeError as exc:  # SuperLU reports "Factor is exactly singular"
        raise SingularSystem(str(exc)) from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    return x


def cg_solve(
    a: SparseMatrix,
    b,
    tol: float = 1e-12,
    max_iter: int | None = None,
    x0=None,
) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients for SPD ``a``.

    Stops once ``||a x - b|| <= tol * ||b||`` (recursive residual, confirmed
    against the true residual before returning).
    """
    b = np.asarray(b, dtype=float)
    _check_square(a, b)
    n = a.n_rows
    if max_iter is None:
        max_iter = max(10 * n, 100)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = a.diagonal()
    if np.any(diag <= 0.0):
        raise ContractViolation("cg_solve needs a positive diagonal")
    inv_diag = 1.0 / diag
    m = a.to_scipy()

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - m @ x
    z = inv_diag * r
    d = z.copy()
    rz = r @ z
    trace = [np.linalg.norm(r) / bnorm]
    for _ in range(max_iter):
        if trace[-1] <= tol:
            true_res = np.linalg.norm(b - m @ x) / bnorm
            if true_res <= tol:
                return x
            # recursive residual drifted, restart from the true one
            r = b - m @ x
            z = inv_diag * r
            d = z.copy()
            rz = r @ z
        ad = m @ d
        dad = d @ ad
        if dad <= 0.0:
            raise ContractViolation("matrix is not positive definite")
        step = rz / dad
        x += step * d
        r -= step * ad
        z = inv_diag * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
        trace.append(np.linalg.norm(r) / bnorm)
    if trace[-1] <= tol and np.linalg.norm(b - m @ x) / bnorm <= tol:
        return x
    raise MaxIterations(f"cg did not converge in {max_iter} iterations", trace)
