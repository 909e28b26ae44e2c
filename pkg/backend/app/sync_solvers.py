"""
Reference synchronous iterations.

All four solvers evaluate residual components through the shared CSR row
kernel, so ``first_order`` at alpha=1 reproduces ``standard_iteration`` and
``second_order`` at beta=0 reproduces ``first_order`` bit for bit.
"""

import logging
import numpy as np
from scipy.sparse.linalg import spsolve
from typing import Callable, Optional

from .errors import InvalidArgumentError, SingularPreconditionerError
from .kernels import gauss_seidel_sweep, jacobi_step, richardson_step, second_order_step
from .models import IterationTrace, IterParams, SplittingSystem
from .sparse_core import as_real_vector, initial_residual_norm, norm2, relative_residual

logger = logging.getLogger(__name__)


def default_stride(k_max: int) -> int:
    return 1 if k_max <= 1000 else 10


def reference_solution(system: SplittingSystem) -> np.ndarray:
    """Direct sparse solve of ``A x = c``."""
    return np.asarray(spsolve(system.A.to_scipy().tocsc(), np.array(system.c)), dtype=np.float64)


class _TraceRecorder:
    def __init__(self, system: SplittingSystem, x0: np.ndarray, k_max: int, stride: Optional[int],
                 reference: Optional[np.ndarray]):
        self.system = system
        self.k_max = k_max
        self.stride = default_stride(k_max) if stride is None else max(1, stride)
        self.normalizer = initial_residual_norm(system, x0)
        self.reference = None if reference is None else as_real_vector(reference, system.n)
        self.steps = []
        self.residuals = []
        self.errors = []
        self.record(0, x0)

    def due(self, k: int) -> bool:
        return k % self.stride == 0 or k == self.k_max

    def record(self, k: int, x: np.ndarray) -> None:
        self.steps.append(k)
        self.residuals.append(1.0 if k == 0 else relative_residual(self.system, x, self.normalizer))
        if self.reference is not None:
            self.errors.append(norm2(x - self.reference))

    def trace(self, x: np.ndarray) -> IterationTrace:
        return IterationTrace(
            steps=np.array(self.steps, dtype=np.int64),
            residual_norms=np.array(self.residuals),
            error_norms=None if self.reference is None else np.array(self.errors),
            iterations=self.k_max,
            final_x=x.copy(),
        )


def _run_two_level(system: SplittingSystem, x0, k_max: int, step: Callable, stride, reference) -> IterationTrace:
    x = as_real_vector(x0, system.n)
    recorder = _TraceRecorder(system, x, k_max, stride, reference)
    x_out = np.empty_like(x)
    for k in range(k_max):
        step(k, x, x_out)
        x, x_out = x_out, x
        if recorder.due(k + 1):
            recorder.record(k + 1, x)
    return recorder.trace(x)


def standard_iteration(system: SplittingSystem, x0, k_max: int, stride: Optional[int] = None,
                       reference: Optional[np.ndarray] = None) -> IterationTrace:
    """``x <- T x + c``, computed as ``x + r``."""
    A = system.A

    def step(k, x, x_out):
        jacobi_step(A.row_start, A.col_index, A.value, system.c, x, x_out, 0, system.n)

    return _run_two_level(system, x0, k_max, step, stride, reference)


def first_order(system: SplittingSystem, x0, params: IterParams, k_max: int, stride: Optional[int] = None,
                reference: Optional[np.ndarray] = None) -> IterationTrace:
    """``x <- x + alpha_k r``; a non-stationary schedule wraps cyclically."""
    A = system.A

    def step(k, x, x_out):
        richardson_step(A.row_start, A.col_index, A.value, system.c, x, x_out, params.alpha_at(k), 0, system.n)

    return _run_two_level(system, x0, k_max, step, stride, reference)


def second_order(system: SplittingSystem, x0, params: IterParams, k_max: int, stride: Optional[int] = None,
                 reference: Optional[np.ndarray] = None) -> IterationTrace:
    """
    Three-term recurrence ``x_{k+1} = x_k + beta (x_k - x_{k-1}) + (1+beta) alpha r_k``.

    ``x_1`` is one first order step with the same alpha.
    """
    A = system.A
    n = system.n
    x = as_real_vector(x0, n)
    recorder = _TraceRecorder(system, x, k_max, stride, reference)
    if k_max == 0:
        return recorder.trace(x)

    x_prev = x
    x = np.empty_like(x_prev)
    richardson_step(A.row_start, A.col_index, A.value, system.c, x_prev, x, params.alpha, 0, n)
    if recorder.due(1):
        recorder.record(1, x)

    scale = (1.0 + params.beta) * params.alpha
    x_out = np.empty_like(x)
    for k in range(1, k_max):
        second_order_step(A.row_start, A.col_index, A.value, system.c, x, x_prev, x_out, params.beta, scale, 0, n)
        x_prev, x, x_out = x, x_out, x_prev
        if recorder.due(k + 1):
            recorder.record(k + 1, x)
    return recorder.trace(x)


def gauss_seidel(system: SplittingSystem, x0, k_max: int, alpha: float = 1.0, stride: Optional[int] = None,
                 reference: Optional[np.ndarray] = None) -> IterationTrace:
    """Forward in-place sweeps ``x_i <- x_i + alpha r_i / a_ii`` in index order."""
    A = system.A
    diag = A.diagonal()
    zero_rows = np.flatnonzero(diag == 0.0)
    if zero_rows.size:
        raise SingularPreconditionerError(f"zero diagonal entry in row {int(zero_rows[0])}")

    x = as_real_vector(x0, system.n)
    recorder = _TraceRecorder(system, x, k_max, stride, reference)
    for k in range(k_max):
        gauss_seidel_sweep(A.row_start, A.col_index, A.value, diag, system.c, x, alpha, 0, system.n)
        if recorder.due(k + 1):
            recorder.record(k + 1, x)
    return recorder.trace(x)


METHODS = ("standard", "first", "second", "gauss-seidel")


def solve(method: str, system: SplittingSystem, x0, params: IterParams, k_max: int,
          stride: Optional[int] = None, reference: Optional[np.ndarray] = None) -> IterationTrace:
    """Dispatch by method name as used on the command line."""
    logger.info(f"{method} solver: n={system.n}, alpha={params.alpha}, beta={params.beta}, k_max={k_max}")
    if method == "standard":
        return standard_iteration(system, x0, k_max, stride, reference)
    if method == "first":
        return first_order(system, x0, params, k_max, stride, reference)
    if method == "second":
        return second_order(system, x0, params, k_max, stride, reference)
    if method == "gauss-seidel":
        return gauss_seidel(system, x0, k_max, params.alpha, stride, reference)
    raise InvalidArgumentError(f"unknown method {method!r}, expected one of {', '.join(METHODS)}")
