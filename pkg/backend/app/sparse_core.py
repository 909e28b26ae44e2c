"""
Test-problem generation, Jacobi splitting and the vector kernels shared by
all solvers.

``T = I - A`` is never stored: products with ``T`` are ``x - A x``, and the
entrywise absolute copy of ``I - alpha A`` is assembled only when asked for.
"""

import logging
import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, InvalidArgumentError, NonFiniteError, SingularPreconditionerError
from .kernels import csr_matvec, residual_into
from .models import SparseMatrix, SplittingSystem

logger = logging.getLogger(__name__)


def laplacian_2d(m: int) -> SparseMatrix:
    """Five-point Laplacian on an ``m x m`` grid, row-major numbering, Dirichlet boundary."""
    if m < 1:
        raise InvalidArgumentError(f"grid size must be at least 1, got {m}")
    index = np.arange(m * m).reshape(m, m)
    horizontal = (index[:, :-1].ravel(), index[:, 1:].ravel())
    vertical = (index[:-1, :].ravel(), index[1:, :].ravel())
    rows = np.concatenate([index.ravel(), horizontal[0], horizontal[1], vertical[0], vertical[1]])
    cols = np.concatenate([index.ravel(), horizontal[1], horizontal[0], vertical[1], vertical[0]])
    values = np.concatenate([np.full(m * m, 4.0), -np.ones(4 * horizontal[0].size)])
    return SparseMatrix.from_scipy(sp.coo_matrix((values, (rows, cols)), shape=(m * m, m * m)))


def as_real_vector(x, n: int = None) -> np.ndarray:
    """Contiguous float64 copy of ``x``; non-finite entries are rejected."""
    vector = np.array(x, dtype=np.float64, copy=True).reshape(-1)
    if n is not None and vector.shape[0] != n:
        raise DimensionMismatchError(f"vector has length {vector.shape[0]}, expected {n}")
    if not np.all(np.isfinite(vector)):
        raise NonFiniteError("vector contains non-finite entries")
    return vector


def jacobi_split(A_hat: SparseMatrix, b_hat, grid_size: int = None) -> SplittingSystem:
    """``A = D^-1 A_hat``, ``c = D^-1 b_hat`` with ``D = diag(A_hat)``; diag(A) is exactly 1."""
    if not A_hat.is_square:
        raise DimensionMismatchError(f"matrix must be square, got {A_hat.shape}")
    b_hat = as_real_vector(b_hat, A_hat.nrows)
    diag = A_hat.diagonal()
    zero_rows = np.flatnonzero(diag == 0.0)
    if zero_rows.size:
        raise SingularPreconditionerError(f"zero diagonal entry in row {int(zero_rows[0])}")

    rows = A_hat.row_of_entry()
    value = A_hat.value / diag[rows]
    # x/x is 1 in IEEE arithmetic, pin it anyway
    value[rows == A_hat.col_index] = 1.0
    A = SparseMatrix(nrows=A_hat.nrows, ncols=A_hat.ncols, row_start=A_hat.row_start,
                     col_index=A_hat.col_index, value=value)
    return SplittingSystem(A=A, c=b_hat / diag, grid_size=grid_size)


def laplacian_system(m: int, seed: int) -> SplittingSystem:
    """Jacobi-split Laplacian with the seeded uniform right-hand side used by the experiments."""
    return jacobi_split(laplacian_2d(m), random_rhs(m * m, seed), grid_size=m)


def random_rhs(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-0.5, 0.5, n)


def matvec(A: SparseMatrix, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (A.ncols,):
        raise DimensionMismatchError(f"vector has shape {x.shape}, expected ({A.ncols},)")
    y = np.empty(A.nrows)
    csr_matvec(A.row_start, A.col_index, A.value, x, y)
    return y


def residual(system: SplittingSystem, x) -> np.ndarray:
    """``c - A x`` with the row summation order used by every solver."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (system.n,):
        raise DimensionMismatchError(f"vector has shape {x.shape}, expected ({system.n},)")
    r = np.empty(system.n)
    residual_into(system.A.row_start, system.A.col_index, system.A.value, system.c, x, r)
    return r


def norm2(x) -> float:
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64)))


def norm_inf_weighted(x, w) -> float:
    """``max_i |x_i / w_i|`` for a strictly positive weight ``w``."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.shape != w.shape:
        raise DimensionMismatchError(f"weight has shape {w.shape}, expected {x.shape}")
    if not np.all(w > 0.0):
        raise InvalidArgumentError("weights must be strictly positive")
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x / w)))


def initial_residual_norm(system: SplittingSystem, x0) -> float:
    """Normalizer of relative residuals; a zero initial residual normalizes by 1."""
    value = norm2(residual(system, x0))
    return value if value > 0.0 else 1.0


def relative_residual(system: SplittingSystem, x, normalizer: float) -> float:
    return norm2(residual(system, x)) / normalizer


def apply_T(system: SplittingSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x - matvec(system.A, x)
