"""
Shared-memory asynchronous Richardson solvers.

Each worker owns a contiguous block of components and sweeps it in index
order inside a numba kernel that releases the GIL, reading the shared iterate
without any synchronization. Only the owner writes a component. Workers stop
once the summed per-thread update counters reach ``n * target_avg_updates``;
the counters are polled once per local sweep.
"""

import logging
import math
import os
import threading
import time
import numpy as np
from typing import Callable, List, Optional

from .config import settings
from .errors import InvalidArgumentError
from .kernels import async_first_order_worker, async_second_order_worker, richardson_step, second_order_step
from .models import AggregateStats, AsyncConfig, Partition, RunRecord, RunStats, SplittingSystem
from .sparse_core import initial_residual_norm, relative_residual

logger = logging.getLogger(__name__)


def partition_unknowns(n: int, config: AsyncConfig) -> Partition:
    """
    Contiguous ownership blocks.

    Balanced blocks differ in size by at most one. Unbalanced: the first
    ``ceil(p/2)`` threads get ``floor(ratio * n / p)`` unknowns each and the
    remainder is spread evenly over the others.
    """
    p = config.num_threads
    if n < p:
        raise InvalidArgumentError(f"cannot split {n} unknowns over {p} threads")

    if config.partition_mode == "balanced" or p == 1:
        sizes = [n // p + (1 if t < n % p else 0) for t in range(p)]
    else:
        small = math.ceil(p / 2)
        small_size = max(1, int(math.floor(config.unbalanced_ratio * n / p + 1e-9)))
        rest = n - small * small_size
        large = p - small
        if rest < large:
            raise InvalidArgumentError(f"unbalanced ratio {config.unbalanced_ratio} leaves too few unknowns")
        sizes = [small_size] * small + [rest // large + (1 if t < rest % large else 0) for t in range(large)]

    ranges = []
    position = 0
    for size in sizes:
        ranges.append((position, position + size))
        position += size
    return Partition(n=n, ranges=ranges)


def scatter_cpus(num_threads: int) -> List[int]:
    """CPU for each thread, spread as evenly as the available set allows."""
    available = sorted(os.sched_getaffinity(0))
    step = max(1, len(available) // num_threads)
    return [available[(t * step) % len(available)] for t in range(num_threads)]


class AsyncRunner:
    """Runs the asynchronous solvers and their synchronous parallel baseline."""

    def __init__(self):
        self.pin_threads = settings.PIN_THREADS

    def _pin(self, cpu: Optional[int]) -> None:
        if cpu is None:
            return
        try:
            os.sched_setaffinity(0, {cpu})
        except (AttributeError, OSError) as e:
            logger.debug(f"thread pinning unavailable: {e}")

    def _launch(self, num_threads: int, body: Callable[[int], None], pin: bool) -> float:
        """Start ``num_threads`` workers together and return the wall time until all have joined."""
        cpus = [None] * num_threads
        if pin:
            try:
                cpus = scatter_cpus(num_threads)
            except (AttributeError, OSError) as e:
                logger.debug(f"thread pinning unavailable: {e}")
        start = threading.Barrier(num_threads + 1)
        errors = []

        def worker(tid):
            self._pin(cpus[tid])
            start.wait()
            try:
                body(tid)
            except Exception as e:  # surfaced after join
                errors.append(e)

        threads = [threading.Thread(target=worker, args=(tid,), name=f"richardson-{tid}") for tid in range(num_threads)]
        for thread in threads:
            thread.start()
        start.wait()
        t0 = time.perf_counter()
        for thread in threads:
            thread.join()
        wall = time.perf_counter() - t0
        if errors:
            raise errors[0]
        return wall

    def _stats(self, system: SplittingSystem, x: np.ndarray, counts: np.ndarray, normalizer: float,
               threads: int, wall: float) -> RunStats:
        if np.all(np.isfinite(x)):
            rel = relative_residual(system, x, normalizer)
        else:
            rel = math.inf
        if not math.isfinite(rel):
            logger.warning(f"non-finite iterate after run with {threads} threads")
            rel = math.inf
        return RunStats(
            threads=threads,
            update_counts=counts,
            range=int(counts.max() - counts.min()) if counts.size else 0,
            rel_resid=rel,
            failed=rel > 1.0,
            wall_time=wall,
            final_x=x,
        )

    def run_async_first_order(self, system: SplittingSystem, config: AsyncConfig) -> RunStats:
        """Lock-free ``x_i <- x_i + alpha r_i`` sweeps; one thread is a damped Gauss-Seidel sweep."""
        system.require_unit_diagonal()
        n = system.n
        A = system.A
        partition = partition_unknowns(n, config)
        x = np.zeros(n)
        normalizer = initial_residual_norm(system, x)
        update_counts = np.zeros(n, dtype=np.int64)
        thread_counts = np.zeros(partition.num_threads, dtype=np.int64)
        target_total = n * config.target_avg_updates
        alpha = config.params.alpha

        def body(tid):
            lo, hi = partition.ranges[tid]
            async_first_order_worker(A.row_start, A.col_index, A.value, system.c, x, alpha, lo, hi,
                                     update_counts, thread_counts, tid, target_total)

        wall = self._launch(partition.num_threads, body, config.pin_threads or self.pin_threads)
        return self._stats(system, x, update_counts, normalizer, partition.num_threads, wall)

    def run_async_second_order(self, system: SplittingSystem, config: AsyncConfig) -> RunStats:
        """
        Lock-free three-term updates on (current, previous) pairs.

        Each worker publishes a whole block sweep at once, ``prev_i`` before
        ``cur_i``; neighbours owned by other threads may be read from mixed
        generations. The first local sweep is a first order step, so one
        thread equals the synchronous second order solver.
        """
        system.require_unit_diagonal()
        n = system.n
        A = system.A
        partition = partition_unknowns(n, config)
        cur = np.zeros(n)
        prev = np.zeros(n)
        normalizer = initial_residual_norm(system, cur)
        update_counts = np.zeros(n, dtype=np.int64)
        thread_counts = np.zeros(partition.num_threads, dtype=np.int64)
        target_total = n * config.target_avg_updates
        alpha, beta = config.params.alpha, config.params.beta

        def body(tid):
            lo, hi = partition.ranges[tid]
            async_second_order_worker(A.row_start, A.col_index, A.value, system.c, cur, prev, alpha, beta,
                                      lo, hi, update_counts, thread_counts, tid, target_total)

        wall = self._launch(partition.num_threads, body, config.pin_threads or self.pin_threads)
        return self._stats(system, cur, update_counts, normalizer, partition.num_threads, wall)

    def run_sync_parallel(self, system: SplittingSystem, config: AsyncConfig, k_max: int) -> RunStats:
        """
        Synchronous baseline on the same partition: a barrier after every
        iteration, double buffering for first order and triple for second.
        Row arithmetic matches the serial solvers, so the iterate does too.
        """
        n = system.n
        A = system.A
        partition = partition_unknowns(n, config)
        p = partition.num_threads
        params = config.params
        second = not params.is_first_order
        buffers = [np.zeros(n) for _ in range(3 if second else 2)]
        normalizer = initial_residual_norm(system, buffers[0])
        barrier = threading.Barrier(p)
        scale = (1.0 + params.beta) * params.alpha

        def body(tid):
            try:
                sweep(tid)
            except Exception:
                barrier.abort()
                raise

        def sweep(tid):
            lo, hi = partition.ranges[tid]
            for k in range(k_max):
                if second:
                    x = buffers[k % 3]
                    out = buffers[(k + 1) % 3]
                    if k == 0:
                        richardson_step(A.row_start, A.col_index, A.value, system.c, x, out, params.alpha, lo, hi)
                    else:
                        second_order_step(A.row_start, A.col_index, A.value, system.c, x, buffers[(k - 1) % 3],
                                          out, params.beta, scale, lo, hi)
                else:
                    richardson_step(A.row_start, A.col_index, A.value, system.c, buffers[k % 2],
                                    buffers[(k + 1) % 2], params.alpha_at(k), lo, hi)
                barrier.wait()

        wall = self._launch(p, body, config.pin_threads or self.pin_threads)
        x = buffers[k_max % len(buffers)].copy()
        counts = np.full(n, k_max, dtype=np.int64)
        return self._stats(system, x, counts, normalizer, p, wall)

    def run_async(self, system: SplittingSystem, config: AsyncConfig) -> RunStats:
        if config.params.is_first_order:
            return self.run_async_first_order(system, config)
        return self.run_async_second_order(system, config)

    def repeat_runs(self, system: SplittingSystem, config: AsyncConfig,
                    sync_iterations: Optional[int] = None) -> AggregateStats:
        """
        ``config.repetitions`` independent runs from ``x0 = 0``, aggregated; failed
        runs stay in the averages. With ``sync_iterations`` the synchronous
        baseline is timed on the same threads.
        """
        records = []
        for run in range(config.repetitions):
            stats = self.run_async(system, config)
            records.append(RunRecord(
                threads=stats.threads,
                run=run,
                min_updates=int(stats.update_counts.min()),
                max_updates=int(stats.update_counts.max()),
                range=stats.range,
                rel_resid=stats.rel_resid,
                failed=stats.failed,
                wall_time=stats.wall_time,
            ))
            logger.debug(f"p={config.num_threads} run {run}: range={stats.range} rel_resid={stats.rel_resid:.6e}")

        sync_time = sync_rel = None
        if sync_iterations is not None:
            baseline = self.run_sync_parallel(system, config, sync_iterations)
            sync_time, sync_rel = baseline.wall_time, baseline.rel_resid

        aggregate = AggregateStats(
            threads=config.num_threads,
            runs=len(records),
            avg_range=float(np.mean([r.range for r in records])),
            avg_rel_resid=float(np.mean([r.rel_resid for r in records])),
            failures=sum(1 for r in records if r.failed),
            avg_time=float(np.mean([r.wall_time for r in records])),
            sync_time=sync_time,
            sync_rel_resid=sync_rel,
            records=records,
        )
        logger.info(f"p={aggregate.threads}: avg range {aggregate.avg_range:.1f}, "
                    f"avg rel resid {aggregate.avg_rel_resid:.6e}, failures {aggregate.failures}/{aggregate.runs}")
        return aggregate


# Global runner instance
async_runner = AsyncRunner()

run_async_first_order = async_runner.run_async_first_order
run_async_second_order = async_runner.run_async_second_order
run_sync_parallel = async_runner.run_sync_parallel
repeat_runs = async_runner.repeat_runs
