import math
import os

import numpy as np
import pytest

from app.async_runtime import async_runner, partition_unknowns
from app.errors import AssumptionViolationError, InvalidArgumentError
from app.models import AsyncConfig, IterParams, SparseMatrix, SpectrumBounds, SplittingSystem
from app.sparse_core import laplacian_system
from app.spectral import spectral_analyzer
from app.sync_solvers import first_order, gauss_seidel, second_order


def config_for(threads, params=None, target=50, **kwargs):
    return AsyncConfig(num_threads=threads, params=params or IterParams(alpha=1.0), target_avg_updates=target, **kwargs)


# ------------------------------------------------------------- partitions

@pytest.mark.parametrize("n, p", [(10, 3), (100, 7), (36, 36), (5, 1)])
def test_balanced_partition(n, p):
    partition = partition_unknowns(n, config_for(p))
    assert partition.num_threads == p
    assert max(partition.sizes) - min(partition.sizes) <= 1
    assert sum(partition.sizes) == n


def test_unbalanced_partition():
    config = config_for(4, partition_mode="unbalanced", unbalanced_ratio=0.5)
    partition = partition_unknowns(100, config)
    # first ceil(p/2) threads get floor(0.5 * 100 / 4) unknowns
    assert partition.sizes == [12, 12, 38, 38]
    odd = partition_unknowns(100, config_for(3, partition_mode="unbalanced", unbalanced_ratio=2.0 / 3.0))
    assert odd.sizes[:2] == [22, 22]
    assert odd.sizes[2] == 56


def test_unbalanced_with_one_thread_is_balanced():
    config = config_for(1, partition_mode="unbalanced", unbalanced_ratio=0.5)
    assert partition_unknowns(10, config).ranges == [(0, 10)]


def test_partition_needs_enough_unknowns():
    with pytest.raises(InvalidArgumentError):
        partition_unknowns(3, config_for(4))


# --------------------------------------------------------- asynchronous runs

def test_single_thread_first_order_is_gauss_seidel(grid_system):
    params = IterParams(alpha=0.9)
    stats = async_runner.run_async_first_order(grid_system, config_for(1, params, target=40))
    expected = gauss_seidel(grid_system, np.zeros(grid_system.n), 40, alpha=0.9)
    np.testing.assert_array_equal(stats.final_x, expected.final_x)
    assert stats.rel_resid == pytest.approx(expected.final_rel_resid, rel=1e-12)
    assert np.all(stats.update_counts == 40)
    assert stats.range == 0


@pytest.mark.parametrize("threads", [2, 4])
def test_update_counts(grid_system, threads):
    config = config_for(threads, target=100)
    stats = async_runner.run_async_first_order(grid_system, config)
    partition = partition_unknowns(grid_system.n, config)
    for lo, hi in partition.ranges:
        assert np.all(stats.update_counts[lo:hi] == stats.update_counts[lo])
    total = stats.total_updates
    assert grid_system.n * 100 <= total <= grid_system.n * 100 + threads * max(partition.sizes)
    assert stats.range == stats.update_counts.max() - stats.update_counts.min()
    assert stats.wall_time > 0
    assert math.isfinite(stats.rel_resid)


def test_async_second_order_run_bookkeeping(grid_system):
    """Holds for any interleaving of the two workers."""
    params = IterParams(alpha=1.0, beta=0.02)
    config = config_for(2, params, target=200)
    stats = async_runner.run_async_second_order(grid_system, config)
    partition = partition_unknowns(grid_system.n, config)
    assert grid_system.n * 200 <= stats.total_updates <= grid_system.n * 200 + 2 * max(partition.sizes)
    assert stats.update_counts.min() >= 1
    assert stats.range == stats.update_counts.max() - stats.update_counts.min()
    assert math.isfinite(stats.rel_resid)
    assert np.all(np.isfinite(stats.final_x))


@pytest.mark.parametrize("beta", [0.02, 0.5, 0.9])
def test_single_thread_second_order_is_synchronous(grid_system, beta):
    params = IterParams(alpha=1.0, beta=beta)
    stats = async_runner.run_async(grid_system, config_for(1, params, target=120))
    expected = second_order(grid_system, np.zeros(grid_system.n), params, 120)
    np.testing.assert_array_equal(stats.final_x, expected.final_x)
    assert np.all(stats.update_counts == 120)
    assert not stats.failed


def test_divergent_run_is_reported_failed():
    system = laplacian_system(6, 1)
    stats = async_runner.run_async_first_order(system, config_for(1, IterParams(alpha=3.0), target=2000))
    assert stats.failed
    assert stats.rel_resid > 1.0
    assert stats.rel_resid == math.inf


def test_async_runs_require_unit_diagonal():
    system = SplittingSystem(A=SparseMatrix.from_dense([[2.0, -1.0], [-1.0, 2.0]]), c=[1.0, 1.0])
    with pytest.raises(AssumptionViolationError):
        async_runner.run_async_first_order(system, config_for(1))


# ----------------------------------------------------- synchronous baseline

@pytest.mark.parametrize("threads", [1, 3])
def test_sync_parallel_matches_serial_first_order(grid_system, threads):
    params = IterParams(alpha=0.8)
    stats = async_runner.run_sync_parallel(grid_system, config_for(threads, params), 60)
    serial = first_order(grid_system, np.zeros(grid_system.n), params, 60)
    np.testing.assert_array_equal(stats.final_x, serial.final_x)
    assert stats.range == 0


@pytest.mark.parametrize("threads", [1, 4])
def test_sync_parallel_matches_serial_second_order(grid_system, threads):
    params = IterParams(alpha=1.0, beta=0.5)
    stats = async_runner.run_sync_parallel(grid_system, config_for(threads, params), 61)
    serial = second_order(grid_system, np.zeros(grid_system.n), params, 61)
    np.testing.assert_array_equal(stats.final_x, serial.final_x)


def test_repeat_runs_aggregates(grid_system):
    config = config_for(2, target=30, repetitions=3)
    aggregate = async_runner.repeat_runs(grid_system, config, sync_iterations=30)
    assert aggregate.runs == 3
    assert len(aggregate.records) == 3
    assert [r.run for r in aggregate.records] == [0, 1, 2]
    assert aggregate.avg_range == pytest.approx(np.mean([r.range for r in aggregate.records]))
    assert aggregate.failures == sum(r.failed for r in aggregate.records)
    assert aggregate.sync_time is not None and aggregate.sync_time > 0
    serial = first_order(grid_system, np.zeros(grid_system.n), IterParams(alpha=1.0), 30)
    assert aggregate.sync_rel_resid == pytest.approx(serial.final_rel_resid, rel=1e-12)


def test_repeat_runs_keeps_failures_in_averages():
    system = laplacian_system(6, 1)
    aggregate = async_runner.repeat_runs(system, config_for(1, IterParams(alpha=3.0), target=2000, repetitions=2))
    assert aggregate.failures == 2
    assert aggregate.avg_rel_resid > 1.0
    assert aggregate.sync_time is None


# ------------------------------------------------------ full grid statistics

RHO_100 = math.cos(math.pi / 101)


def require_cpus(threads):
    if len(os.sched_getaffinity(0)) < threads:
        pytest.skip(f"needs {threads} CPUs")


@pytest.fixture(scope="module")
def full_grid():
    return laplacian_system(100, 12345)


@pytest.mark.slow
@pytest.mark.parametrize("threads", [4, 8, 16])
def test_first_order_thread_table(full_grid, threads):
    require_cpus(threads)
    config = config_for(threads, target=500, repetitions=100)
    aggregate = async_runner.repeat_runs(full_grid, config, sync_iterations=500)
    assert aggregate.failures == 0
    assert aggregate.avg_rel_resid < aggregate.sync_rel_resid


@pytest.mark.slow
def test_guaranteed_momentum_never_fails(full_grid):
    require_cpus(20)
    beta = 0.5 * (1.0 - RHO_100) / (1.0 + RHO_100)
    config = config_for(20, IterParams(alpha=1.0, beta=beta), target=500, repetitions=100)
    assert async_runner.repeat_runs(full_grid, config).failures == 0


@pytest.mark.slow
def test_single_thread_optimal_momentum_residual(full_grid):
    optimal = spectral_analyzer.optimal_second_order(SpectrumBounds.from_rho(RHO_100)).as_iter_params()
    stats = async_runner.run_async(full_grid, config_for(1, optimal, target=500))
    assert 0.5 * 1.258388e-7 <= stats.rel_resid <= 5 * 1.258388e-7


@pytest.mark.slow
@pytest.mark.parametrize("threads", [1, 4, 8])
def test_large_momentum_table_has_no_failures(full_grid, threads):
    require_cpus(threads)
    config = config_for(threads, IterParams(alpha=1.0, beta=0.9), target=500, repetitions=100)
    assert async_runner.repeat_runs(full_grid, config).failures == 0
