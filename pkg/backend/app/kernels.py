"""
Row-wise CSR kernels compiled with numba.

Every solver in the package (synchronous, asynchronous runtime, simulator)
evaluates a residual component through ``row_residual``, so all of them share
one summation order: ``c[i] - sum_j a_ij x_j`` accumulated left to right over
the stored entries of row ``i``. Reduction identities between solvers are
therefore bitwise, not approximate.

All kernels release the GIL so that the asynchronous workers run in parallel
on plain Python threads. ``fastmath`` stays off: reassociation would break the
shared summation order and NaN detection.
"""

import numba as nb
import numpy as np

_numba_setting = {'nogil': True, 'cache': True}


@nb.njit(**_numba_setting)
def row_residual(row_start, col_index, value, c, x, i):
    """Residual component ``c[i] - (A x)[i]``."""
    acc = 0.0
    for jj in range(row_start[i], row_start[i + 1]):
        acc += value[jj] * x[col_index[jj]]
    return c[i] - acc


@nb.njit(**_numba_setting)
def csr_matvec(row_start, col_index, value, x, y):
    for i in range(row_start.shape[0] - 1):
        acc = 0.0
        for jj in range(row_start[i], row_start[i + 1]):
            acc += value[jj] * x[col_index[jj]]
        y[i] = acc


@nb.njit(**_numba_setting)
def residual_into(row_start, col_index, value, c, x, r):
    for i in range(row_start.shape[0] - 1):
        r[i] = row_residual(row_start, col_index, value, c, x, i)


@nb.njit(**_numba_setting)
def jacobi_step(row_start, col_index, value, c, x, x_out, lo, hi):
    """Standard iteration ``x_out = x + r`` on rows ``[lo, hi)``."""
    for i in range(lo, hi):
        x_out[i] = x[i] + row_residual(row_start, col_index, value, c, x, i)


@nb.njit(**_numba_setting)
def richardson_step(row_start, col_index, value, c, x, x_out, alpha, lo, hi):
    """First order step ``x_out = x + alpha r`` on rows ``[lo, hi)``."""
    for i in range(lo, hi):
        x_out[i] = x[i] + alpha * row_residual(row_start, col_index, value, c, x, i)


@nb.njit(**_numba_setting)
def second_order_step(row_start, col_index, value, c, x, x_prev, x_out, beta, scale, lo, hi):
    """Three-term step ``x_out = x + beta (x - x_prev) + scale r``, scale = (1+beta) alpha."""
    for i in range(lo, hi):
        r = row_residual(row_start, col_index, value, c, x, i)
        x_out[i] = x[i] + beta * (x[i] - x_prev[i]) + scale * r


@nb.njit(**_numba_setting)
def gauss_seidel_sweep(row_start, col_index, value, diag, c, x, alpha, lo, hi):
    """In-place forward sweep ``x_i <- x_i + alpha r_i / a_ii`` using current values."""
    for i in range(lo, hi):
        r = row_residual(row_start, col_index, value, c, x, i)
        x[i] = x[i] + alpha * (r / diag[i])


@nb.njit(**_numba_setting)
def _counter_total(thread_counts):
    total = 0
    for t in range(thread_counts.shape[0]):
        total += thread_counts[t]
    return total


@nb.njit(**_numba_setting)
def async_first_order_worker(row_start, col_index, value, c, x, alpha, lo, hi,
                             update_counts, thread_counts, tid, target_total):
    """
    Owner loop of one asynchronous first order worker.

    Sweeps ``[lo, hi)`` in index order reading the shared ``x`` without
    synchronization. Each thread only writes its own slot of
    ``thread_counts``; the termination counter is the racy sum of all slots,
    polled once per sweep.
    """
    block = hi - lo
    while True:
        for i in range(lo, hi):
            r = row_residual(row_start, col_index, value, c, x, i)
            x[i] = x[i] + alpha * r
            update_counts[i] += 1
        thread_counts[tid] += block
        if _counter_total(thread_counts) >= target_total:
            break


@nb.njit(**_numba_setting)
def async_second_order_worker(row_start, col_index, value, c, cur, prev, alpha, beta, lo, hi,
                              update_counts, thread_counts, tid, target_total):
    """
    Owner loop of one asynchronous second order worker.

    A sweep computes the whole block into a local buffer from the shared
    ``cur``/``prev`` and only then publishes it, ``prev[i]`` before
    ``cur[i]``. Within a block the update is Jacobi-style, so one thread
    reproduces the synchronous recurrence; other threads may still observe
    any mix of generations. The first local sweep applies the first order
    start rule.
    """
    block = hi - lo
    scale = (1.0 + beta) * alpha
    fresh = np.empty(block)
    first_sweep = True
    while True:
        for i in range(lo, hi):
            r = row_residual(row_start, col_index, value, c, cur, i)
            if first_sweep:
                fresh[i - lo] = cur[i] + alpha * r
            else:
                fresh[i - lo] = cur[i] + beta * (cur[i] - prev[i]) + scale * r
        for i in range(lo, hi):
            prev[i] = cur[i]
            cur[i] = fresh[i - lo]
            update_counts[i] += 1
        first_sweep = False
        thread_counts[tid] += block
        if _counter_total(thread_counts) >= target_total:
            break


@nb.njit(**_numba_setting)
def gather_delayed(history, instant, delays, read):
    """``read[j] = x_j`` as stored at instant ``instant - 1 - delays[j]`` (ring buffer)."""
    depth = history.shape[0]
    for j in range(read.shape[0]):
        read[j] = history[(instant - 1 - delays[j]) % depth, j]


@nb.njit(**_numba_setting)
def sim_first_order_update(row_start, col_index, value, c, read, members, out, alpha):
    for t in range(members.shape[0]):
        i = members[t]
        out[i] = read[i] + alpha * row_residual(row_start, col_index, value, c, read, i)


@nb.njit(**_numba_setting)
def sim_second_order_update(row_start, col_index, value, c, read, members, out,
                            alpha, beta, started, n):
    """
    Componentwise application of the doubled-size fixed point map.

    Indices below ``n`` are the current block, the rest the previous-iterate
    copy. A current component that has never been updated takes the first
    order start rule.
    """
    scale = (1.0 + beta) * alpha
    for t in range(members.shape[0]):
        idx = members[t]
        if idx < n:
            r = row_residual(row_start, col_index, value, c, read, idx)
            if started[idx]:
                out[idx] = read[idx] + beta * (read[idx] - read[n + idx]) + scale * r
            else:
                out[idx] = read[idx] + alpha * r
                started[idx] = True
        else:
            out[idx] = read[idx - n]

