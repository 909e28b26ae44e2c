import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, PrivateAttr, field_validator, model_validator
from typing import Optional

from ..errors import AssumptionViolationError, DimensionMismatchError, InvalidArgumentError, NonFiniteError


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.ascontiguousarray(values, dtype=dtype)
    array.flags.writeable = False
    return array


class SparseMatrix(BaseModel):
    """Compressed sparse row matrix, immutable after construction."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    nrows: int
    ncols: int
    row_start: np.ndarray
    col_index: np.ndarray
    value: np.ndarray

    @field_validator("row_start", "col_index", mode="before")
    @classmethod
    def _as_index_array(cls, v):
        return _frozen_array(v, np.int64)

    @field_validator("value", mode="before")
    @classmethod
    def _as_value_array(cls, v):
        return _frozen_array(v, np.float64)

    @model_validator(mode="after")
    def _check_structure(self):
        if self.nrows < 0 or self.ncols < 0:
            raise InvalidArgumentError("matrix dimensions must be nonnegative")
        rs = self.row_start
        nnz = self.col_index.shape[0]
        if rs.shape[0] != self.nrows + 1:
            raise InvalidArgumentError(f"row_start has length {rs.shape[0]}, expected {self.nrows + 1}")
        if rs[0] != 0 or rs[-1] != nnz or self.value.shape[0] != nnz:
            raise InvalidArgumentError("row_start must start at 0 and end at the number of stored entries")
        if np.any(np.diff(rs) < 0):
            raise InvalidArgumentError("row_start must be non-decreasing")
        if nnz:
            if self.col_index.min() < 0 or self.col_index.max() >= self.ncols:
                raise InvalidArgumentError("column index out of range")
            # strictly increasing columns within a row; row starts may reset
            starts_row = np.zeros(nnz, dtype=bool)
            starts_row[rs[:-1][rs[:-1] < nnz]] = True
            if not np.all((np.diff(self.col_index) > 0) | starts_row[1:]):
                raise InvalidArgumentError("column indices must be strictly increasing within each row")
        return self

    @property
    def nnz(self) -> int:
        return int(self.col_index.shape[0])

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def is_square(self) -> bool:
        return self.nrows == self.ncols

    @property
    def explicit_zeros(self) -> int:
        return int(np.count_nonzero(self.value == 0.0))

    def diagonal(self) -> np.ndarray:
        diag = np.zeros(min(self.nrows, self.ncols))
        rows = self.row_of_entry()
        on_diagonal = rows == self.col_index
        diag[rows[on_diagonal]] = self.value[on_diagonal]
        return diag

    def row_of_entry(self) -> np.ndarray:
        return np.repeat(np.arange(self.nrows), np.diff(self.row_start))

    def entry(self, i: int, j: int) -> float:
        lo, hi = self.row_start[i], self.row_start[i + 1]
        pos = np.searchsorted(self.col_index[lo:hi], j)
        if pos < hi - lo and self.col_index[lo + pos] == j:
            return float(self.value[lo + pos])
        return 0.0

    def is_symmetric(self) -> bool:
        """Exact structural and numerical symmetry."""
        if not self.is_square:
            return False
        csr = self.to_scipy()
        return (csr != csr.T).nnz == 0

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((np.array(self.value), np.array(self.col_index), np.array(self.row_start)),
                             shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def iteration_matrix_abs(self, alpha: float) -> sp.csr_matrix:
        """Entrywise absolute value of ``I - alpha A``, assembled on demand."""
        matrix = sp.csr_matrix(sp.identity(self.nrows, format="csr") - alpha * self.to_scipy())
        matrix = abs(matrix)
        matrix.eliminate_zeros()
        return matrix

    @classmethod
    def from_scipy(cls, matrix) -> "SparseMatrix":
        csr = sp.csr_matrix(matrix, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(nrows=csr.shape[0], ncols=csr.shape[1], row_start=csr.indptr,
                   col_index=csr.indices, value=csr.data)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        return cls.from_scipy(sp.csr_matrix(dense))


class SplittingSystem(BaseModel):
    """Preconditioned system ``A x = c`` with implicit ``T = I - A``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: SparseMatrix
    c: np.ndarray
    # side length when A came from the generated 5-point Laplacian
    grid_size: Optional[int] = None

    _rho: Optional[float] = PrivateAttr(default=None)

    @field_validator("c", mode="before")
    @classmethod
    def _as_vector(cls, v):
        array = _frozen_array(v, np.float64)
        if not np.all(np.isfinite(array)):
            raise NonFiniteError("right-hand side contains non-finite entries")
        return array

    @model_validator(mode="after")
    def _check_dimensions(self):
        if not self.A.is_square:
            raise DimensionMismatchError(f"system matrix must be square, got {self.A.shape}")
        if self.c.shape != (self.A.nrows,):
            raise DimensionMismatchError(f"right-hand side has length {self.c.shape[0]}, expected {self.A.nrows}")
        return self

    @property
    def n(self) -> int:
        return self.A.nrows

    @property
    def unit_diagonal(self) -> bool:
        return bool(np.all(self.A.diagonal() == 1.0))

    @property
    def nonnegative(self) -> bool:
        """True when ``T = I - A`` is entrywise nonnegative."""
        rows = self.A.row_of_entry()
        off_diagonal = rows != self.A.col_index
        if np.any(self.A.value[off_diagonal] > 0.0):
            return False
        return bool(np.all(self.A.diagonal() <= 1.0))

    def require_unit_diagonal(self) -> None:
        if not self.unit_diagonal:
            raise AssumptionViolationError("unit diagonal", "A = D^-1 A_hat must have diagonal exactly 1")

    def require_nonnegative(self) -> None:
        if not self.nonnegative:
            raise AssumptionViolationError("T >= 0", "off-diagonal entries of -A must be nonnegative")

    def iteration_matrix_abs(self, alpha: float = 1.0) -> sp.csr_matrix:
        return self.A.iteration_matrix_abs(alpha)

    def dense_T(self) -> np.ndarray:
        return np.eye(self.n) - self.A.to_dense()
