import math

import numpy as np
import pytest

from app.errors import AssumptionViolationError, ConfigError, DimensionMismatchError, InvalidArgumentError, NonFiniteError
from app.models import (
    AsyncConfig,
    ExperimentConfig,
    IterParams,
    Partition,
    RunStats,
    Schedule,
    SimulationConfig,
    SparseMatrix,
    SplittingSystem,
    SpectrumBounds,
    SweepRow,
    SweepTable,
    parse_partition,
)


def test_sparse_matrix_rejects_unsorted_columns():
    with pytest.raises(InvalidArgumentError):
        SparseMatrix(nrows=1, ncols=3, row_start=[0, 2], col_index=[2, 0], value=[1.0, 2.0])


def test_sparse_matrix_rejects_bad_row_start():
    with pytest.raises(InvalidArgumentError):
        SparseMatrix(nrows=2, ncols=2, row_start=[0, 1], col_index=[0], value=[1.0])
    with pytest.raises(InvalidArgumentError):
        SparseMatrix(nrows=2, ncols=2, row_start=[0, 2, 1], col_index=[0, 1], value=[1.0, 2.0])


def test_sparse_matrix_is_immutable():
    A = SparseMatrix.from_dense([[2.0, -1.0], [-1.0, 2.0]])
    with pytest.raises(ValueError):
        A.value[0] = 5.0
    assert A.nnz == 4
    assert A.entry(0, 1) == -1.0
    assert A.entry(1, 1) == 2.0
    assert A.is_symmetric()
    np.testing.assert_array_equal(A.diagonal(), [2.0, 2.0])


def test_sparse_matrix_empty_rows_allowed():
    A = SparseMatrix(nrows=3, ncols=3, row_start=[0, 1, 1, 2], col_index=[0, 2], value=[1.0, 3.0])
    np.testing.assert_array_equal(A.to_dense(), [[1, 0, 0], [0, 0, 0], [0, 0, 3]])


def test_iteration_matrix_abs():
    A = SparseMatrix.from_dense([[1.0, -0.5], [-0.25, 1.0]])
    dense = A.iteration_matrix_abs(2.0).toarray()
    np.testing.assert_allclose(dense, [[1.0, 1.0], [0.5, 1.0]])


def test_splitting_system_checks():
    A = SparseMatrix.from_dense([[1.0, -0.5], [-0.5, 1.0]])
    with pytest.raises(DimensionMismatchError):
        SplittingSystem(A=A, c=[1.0, 2.0, 3.0])
    with pytest.raises(NonFiniteError):
        SplittingSystem(A=A, c=[1.0, np.nan])
    system = SplittingSystem(A=A, c=[1.0, 2.0])
    assert system.unit_diagonal and system.nonnegative
    np.testing.assert_array_equal(system.dense_T(), [[0.0, 0.5], [0.5, 0.0]])


def test_splitting_system_assumption_errors():
    signed = SplittingSystem(A=SparseMatrix.from_dense([[1.0, 0.5], [0.5, 1.0]]), c=[0.0, 0.0])
    with pytest.raises(AssumptionViolationError) as info:
        signed.require_nonnegative()
    assert info.value.exit_code == 2
    scaled = SplittingSystem(A=SparseMatrix.from_dense([[2.0, 0.0], [0.0, 1.0]]), c=[0.0, 0.0])
    with pytest.raises(AssumptionViolationError):
        scaled.require_unit_diagonal()


def test_spectrum_bounds():
    bounds = SpectrumBounds.from_rho(0.5)
    assert (bounds.a, bounds.b) == (0.5, 1.5)
    with pytest.raises(InvalidArgumentError):
        SpectrumBounds(a=0.0, b=1.0)
    with pytest.raises(InvalidArgumentError):
        SpectrumBounds(a=2.0, b=1.0)
    with pytest.raises(InvalidArgumentError):
        SpectrumBounds.from_rho(1.0)


def test_iter_params_schedule_wraps():
    params = IterParams(alpha=1.0, alpha_schedule=[0.5, 1.0, 1.5])
    assert [params.alpha_at(k) for k in range(5)] == [0.5, 1.0, 1.5, 0.5, 1.0]
    assert params.schedule_bound() == 1.5
    assert IterParams(alpha=0.7).alpha_at(42) == 0.7
    with pytest.raises(InvalidArgumentError):
        IterParams(alpha=1.0, alpha_schedule=[0.5, 2.0], alpha_bar=1.5)
    with pytest.raises(InvalidArgumentError):
        IterParams(alpha=math.inf)


def test_partition_cover():
    partition = Partition(n=10, ranges=[(0, 4), (4, 7), (7, 10)])
    assert partition.sizes == [4, 3, 3]
    np.testing.assert_array_equal(partition.owner(), [0, 0, 0, 0, 1, 1, 1, 2, 2, 2])
    with pytest.raises(InvalidArgumentError):
        Partition(n=10, ranges=[(0, 4), (5, 10)])
    with pytest.raises(InvalidArgumentError):
        Partition(n=10, ranges=[(0, 4), (4, 9)])


def test_run_stats_integrity():
    counts = np.array([3, 5, 4])
    stats = RunStats(threads=1, update_counts=counts, range=2, rel_resid=0.5, failed=False, wall_time=0.1)
    assert stats.total_updates == 12
    with pytest.raises(InvalidArgumentError):
        RunStats(threads=1, update_counts=counts, range=1, rel_resid=0.5, failed=False, wall_time=0.1)
    with pytest.raises(InvalidArgumentError):
        RunStats(threads=1, update_counts=counts, range=2, rel_resid=2.0, failed=False, wall_time=0.1)
    diverged = RunStats(threads=1, update_counts=counts, range=2, rel_resid=math.inf, failed=True, wall_time=0.1)
    assert diverged.failed


def test_async_config_unbalanced_needs_ratio():
    with pytest.raises(InvalidArgumentError):
        AsyncConfig(num_threads=4, partition_mode="unbalanced", params=IterParams(alpha=1.0))
    config = AsyncConfig(num_threads=4, partition_mode="unbalanced", unbalanced_ratio=0.5, params=IterParams(alpha=1.0))
    assert config.unbalanced_ratio == 0.5


def test_schedule_history_depth_and_replay():
    assert Schedule(kind="bounded_random", horizon=10, max_delay=5).history_depth == 6
    with pytest.raises(InvalidArgumentError):
        Schedule(kind="replay", horizon=10)


def test_sweep_table_divergence_frequency():
    table = SweepTable(rows=[
        SweepRow(max_delay=0, seed=0, final_residual=1e-3, diverged=False),
        SweepRow(max_delay=5, seed=0, final_residual=1e7, diverged=True),
        SweepRow(max_delay=5, seed=1, final_residual=1e-2, diverged=False),
    ])
    assert table.divergence_frequency() == {0: 0.0, 5: 0.5}


def test_parse_partition():
    assert parse_partition("balanced") == ("balanced", None)
    mode, ratio = parse_partition("unbalanced:2/3")
    assert mode == "unbalanced" and ratio == pytest.approx(2.0 / 3.0)
    assert parse_partition("unbalanced:0.25") == ("unbalanced", 0.25)
    assert parse_partition("unbalanced")[1] == pytest.approx(2.0 / 3.0)


def test_experiment_config_parses_lists():
    config = ExperimentConfig(mode="table2", threads="1, 2,4", t_values="50;100")
    assert config.threads == [1, 2, 4]
    assert config.t_values == [50, 100]
    assert config.partition_mode == ("balanced", None)


def test_experiment_config_rejections():
    with pytest.raises(ValueError):
        ExperimentConfig(threads="0,2")
    with pytest.raises(ValueError):
        ExperimentConfig(beta=0.5, optimal_beta=True)
    with pytest.raises(ValueError):
        ExperimentConfig(partition="unbalanced:1.5")
    with pytest.raises(ValueError):
        ExperimentConfig(colour="blue")


def test_simulation_config_coerces_order():
    config = SimulationConfig(order="1", delays="0,5", seeds="7")
    assert config.order == 1
    assert config.delays == [0, 5]
    assert config.seeds == [7]
    with pytest.raises(ValueError):
        SimulationConfig(order=3)


def test_config_error_names_key():
    error = ConfigError("must be positive", key="reps")
    assert str(error) == "reps: must be positive"
    assert error.exit_code == 1
