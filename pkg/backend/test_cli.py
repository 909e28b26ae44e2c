import json

import pandas as pd
import pytest

from app.cli import EXPERIMENT_KEYS, build_config, build_parser, main, read_config_file
from app.errors import ConfigError, OutputError
from app.models import ExperimentConfig


def run(*argv):
    return main([str(a) for a in argv])


# ------------------------------------------------------------------ spectra

def test_spectra_for_given_rho(capsys):
    assert run("spectra", "--rho", 0.5) == 0
    out = capsys.readouterr().out
    assert "optimal second order beta" in out
    assert "0.2679491924" in out


def test_spectra_with_params_reports_regions(capsys):
    assert run("spectra", "--rho", 0.9, "--alpha", 1.0, "--beta", 0.3929) == 0
    out = capsys.readouterr().out
    assert "asynchronous convergence condition holds" in out
    assert out.rstrip().splitlines()[-2].endswith(": no")


def test_spectra_for_generated_system(capsys):
    assert run("spectra", "--m", 6, "--optimal-beta") == 0
    out = capsys.readouterr().out
    assert "dimension n" in out and ": 36" in out
    assert "rho(T) closed form" in out


def test_spectra_matrix_with_signed_T_exits_2(tmp_path, capsys):
    path = tmp_path / "signed.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 2\n1 2 1\n2 1 1\n2 2 2\n")
    assert run("spectra", "--matrix", path) == 2
    assert "T >= 0" in capsys.readouterr().err


def test_spectra_zero_diagonal_exits_2(tmp_path):
    path = tmp_path / "zero.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1\n2 2 2\n")
    assert run("spectra", "--matrix", path) == 2


def test_missing_matrix_exits_3(tmp_path):
    assert run("spectra", "--matrix", tmp_path / "nope.mtx") == 3


def test_malformed_matrix_exits_3(tmp_path, capsys):
    path = tmp_path / "bad.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n")
    assert run("spectra", "--matrix", path) == 3
    assert "line 3" in capsys.readouterr().err


# ------------------------------------------------------------ contour/solve

def test_contour_writes_grid(tmp_path, capsys):
    path = tmp_path / "contour.csv"
    assert run("contour", "--rho", 0.5, "--alpha-range", "0,2", "--beta-range=-0.5,0.5",
               "--resolution", 11, "--samples", 64, "--file", path) == 0
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["alpha", "beta", "radius_sync", "radius_async"]
    assert len(frame) == 121
    # alpha = 0 has no asynchronous radius
    assert frame.loc[frame["alpha"] == 0.0, "radius_async"].isna().all()
    assert frame["beta"].iloc[0] == -0.5 and frame["beta"].iloc[10] == -0.5
    assert run("validate", path) == 0
    assert "contour ok" in capsys.readouterr().out


def test_contour_bad_range_exits_1(tmp_path):
    assert run("contour", "--rho", 0.5, "--alpha-range", "0", "--file", tmp_path / "c.csv") == 1


def test_solve_writes_trace(tmp_path):
    assert run("solve", "--m", 6, "--method", "second", "--optimal-beta", "--iterations", 30,
               "--error", "--out", tmp_path) == 0
    frame = pd.read_csv(tmp_path / "solve_second.csv")
    assert list(frame.columns) == ["k", "rel_resid", "error_norm"]
    assert len(frame) == 31
    assert frame["rel_resid"].iloc[0] == 1.0
    assert frame["rel_resid"].iloc[-1] < 1e-3


def test_solve_rejects_unknown_method(tmp_path):
    assert run("solve", "--method", "cg", "--out", tmp_path) == 1


# --------------------------------------------------------------- experiment

def test_table_experiment_and_validation(tmp_path, capsys):
    assert run("experiment", "--mode", "table1", "--m", 6, "--threads", "1,2", "--reps", 2,
               "--target-updates", 20, "--out", tmp_path) == 0
    table = tmp_path / "table1"
    aggregate = pd.read_csv(table / "aggregate.csv")
    runs = pd.read_csv(table / "runs.csv")
    assert list(aggregate["threads"]) == [1, 2]
    assert len(runs) == 4
    assert (runs["max_updates"] - runs["min_updates"] == runs["range"]).all()
    assert aggregate["sync_time"].notna().all()
    metadata = json.loads((table / "metadata.json").read_text())
    assert metadata["config"]["experiment"]["m"] == 6
    assert "logical_cores" in metadata["hardware"]

    assert run("validate", table / "runs.csv", table / "aggregate.csv") == 0
    out = capsys.readouterr().out
    assert "runs ok" in out and "aggregate ok" in out


def test_validate_detects_tampering(tmp_path):
    assert run("experiment", "--mode", "table1", "--m", 6, "--threads", 1, "--reps", 2,
               "--target-updates", 10, "--out", tmp_path) == 0
    path = tmp_path / "table1" / "runs.csv"
    runs = pd.read_csv(path)
    runs.loc[0, "range"] = runs.loc[0, "range"] + 3
    runs.to_csv(path, index=False)
    assert run("validate", path) == 1


def test_experiment_from_config_file(tmp_path):
    config = tmp_path / "table2.cfg"
    config.write_text("# second order table\nmode = table2\nm = 6\nthreads = 1, 2\nreps = 1\n"
                      "target-updates = 10  # short run\nxlsx = true\n")
    assert run("experiment", "--config", config, "--out", tmp_path) == 0
    assert (tmp_path / "table2" / "aggregate.csv").exists()
    assert (tmp_path / "table2" / "table2.xlsx").exists()
    metadata = json.loads((tmp_path / "table2" / "metadata.json").read_text())
    assert metadata["config"]["results"]["beta"] > 0


def test_experiment_flags_override_config(tmp_path):
    config = tmp_path / "exp.cfg"
    config.write_text("mode = table1\nreps = 5\n")
    args = build_parser().parse_args(["experiment", "--config", str(config), "--reps", "2"])
    built = build_config(ExperimentConfig, args, EXPERIMENT_KEYS)
    assert built.reps == 2
    assert built.mode == "table1"


def test_experiment_invalid_value_exits_1(tmp_path, capsys):
    assert run("experiment", "--reps", 0, "--out", tmp_path) == 1
    assert "reps" in capsys.readouterr().err


def test_experiment_unknown_config_key(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("colour = blue\n")
    assert run("experiment", "--config", config, "--out", tmp_path) == 1
    assert "colour" in capsys.readouterr().err


def test_timing_experiment(tmp_path):
    assert run("experiment", "--mode", "timing", "--m", 6, "--t-values", "5,10", "--timing-tests", 2,
               "--timing-threads", 2, "--out", tmp_path) == 0
    frame = pd.read_csv(tmp_path / "timing" / "timing.csv")
    assert list(frame.columns) == ["partition", "order", "target_updates", "test", "wall_time", "rel_resid"]
    # per partition: first order averaged per t, second order one row per test
    assert len(frame) == 2 * (2 + 2 * 2)
    assert frame.loc[frame["order"] == 1, "test"].isna().all()
    assert set(frame["partition"]) == {"balanced", "unbalanced:0.6667"}


# ---------------------------------------------------------------- simulate

def test_simulate_sweep(tmp_path, capsys):
    assert run("simulate", "--m", 4, "--delays", "0,2", "--seeds", "0,1", "--horizon", 100,
               "--out", tmp_path) == 0
    frame = pd.read_csv(tmp_path / "sweep.csv")
    assert list(frame.columns) == ["max_delay", "seed", "final_residual", "diverged"]
    assert len(frame) == 4
    assert "B=2: divergence frequency" in capsys.readouterr().out


def test_simulate_single_trace(tmp_path):
    assert run("simulate", "--m", 4, "--order", 1, "--schedule", "cyclic", "--horizon", 50, "--stride", 5,
               "--out", tmp_path) == 0
    frame = pd.read_csv(tmp_path / "simulate_cyclic.csv")
    assert list(frame["k"]) == list(range(0, 51, 5))


def test_simulate_dump_validate_replay(tmp_path):
    dump = tmp_path / "schedule.txt"
    assert run("simulate", "--m", 4, "--order", 1, "--schedule", "bounded_random", "--delays", 3, "--seeds", 1,
               "--horizon", 60, "--stride", 1, "--dump-schedule", dump, "--out", tmp_path / "a") == 0
    assert run("validate", dump, "--width", 16, "--max-delay", 3, "--window") == 0
    assert run("validate", dump, "--width", 16, "--max-delay", 1) == 2
    assert run("simulate", "--m", 4, "--order", 1, "--schedule", "replay", "--replay", dump, "--delays", 3,
               "--horizon", 60, "--stride", 1, "--out", tmp_path / "b") == 0
    original = pd.read_csv(tmp_path / "a" / "simulate_bounded_random.csv")
    replayed = pd.read_csv(tmp_path / "b" / "simulate_replay.csv")
    pd.testing.assert_frame_equal(original, replayed)


def test_validate_schedule_needs_width(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("1;0;0\n")
    assert run("validate", path) == 1


# ------------------------------------------------------------------ parser

def test_usage_errors_exit_1(capsys):
    assert run("frobnicate") == 1
    assert run() == 1
    assert "error:" in capsys.readouterr().err


def test_read_config_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("\n# comment\npin-threads = true\nthreads = 1,2  # inline\nout = ${HOME}/x\n")
    assert read_config_file(path) == {"pin_threads": "true", "threads": "1,2", "out": "${HOME}/x"}
    path.write_text("threads\n")
    with pytest.raises(ConfigError) as info:
        read_config_file(path)
    assert info.value.key == "threads"
    with pytest.raises(OutputError):
        read_config_file(tmp_path / "missing.cfg")
