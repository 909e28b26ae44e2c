"""
Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
assumption violation, 3 I/O error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from .async_sim import async_simulator, dump_realization, read_realization, validate_realization
from .config import configure_logging, settings
from .errors import ConfigError, InvalidArgumentError, OutputError, RichardsonError
from .matrix_market import load_matrix_market
from .models import ExperimentConfig, IterParams, Schedule, SimulationConfig, SpectrumBounds, SplittingSystem
from .services.experiment_service import experiment_service
from .services.export_service import export_service
from .services.report_service import report_service
from .sparse_core import jacobi_split, laplacian_system, random_rhs
from .spectral import spectral_analyzer
from .sync_solvers import METHODS, reference_solution, solve

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def read_config_file(path: str) -> Dict[str, str]:
    """``key = value`` lines with ``#`` comments, parsed by python-dotenv; keys are normalised to field names."""
    if not Path(path).is_file():
        raise OutputError(f"cannot read config {path}: no such file")
    values = {}
    for key, value in dotenv_values(path, interpolate=False).items():
        if value is None:
            raise ConfigError("expected 'key = value'", key=key)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_config(model, args: argparse.Namespace, keys: List[str]):
    """Model defaults < config file < flags; validation errors name the offending key."""
    values: Dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in keys:
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    try:
        return model(**values)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or None
        raise ConfigError(error["msg"], key=key)


def _params(alpha: float, beta: Optional[float], optimal_beta: bool, rho: float) -> IterParams:
    if optimal_beta:
        optimal = spectral_analyzer.optimal_second_order(SpectrumBounds.from_rho(rho))
        return IterParams(alpha=optimal.alpha, beta=optimal.beta)
    return IterParams(alpha=alpha, beta=beta or 0.0)


def _system(args) -> SplittingSystem:
    if getattr(args, "matrix", None):
        A_hat = load_matrix_market(args.matrix)
        return jacobi_split(A_hat, random_rhs(A_hat.nrows, args.seed))
    return laplacian_system(args.m, args.seed)


def _out_dir(args) -> Path:
    return Path(args.out if args.out is not None else settings.OUTPUT_DIR)


# ------------------------------------------------------------------ commands

def cmd_spectra(args) -> int:
    if args.rho is not None and not args.matrix:
        report = report_service.parameter_report(args.rho)
        if args.alpha is not None or args.beta is not None or args.optimal_beta:
            params = _params(args.alpha if args.alpha is not None else 1.0, args.beta, args.optimal_beta, args.rho)
            report = report_service.parameter_report(args.rho, params)
    else:
        system = _system(args)
        params = None
        if args.alpha is not None or args.beta is not None or args.optimal_beta:
            rho = spectral_analyzer.check_assumptions(system, tol=args.power_tol).rho
            params = _params(args.alpha if args.alpha is not None else 1.0, args.beta, args.optimal_beta, rho)
        report = report_service.spectra_report(system, params, tol=args.power_tol)
    print(report_service.format_report(report))
    return 0


def cmd_contour(args) -> int:
    alpha_range = _pair(args.alpha_range, "alpha-range")
    beta_range = _pair(args.beta_range, "beta-range")
    grid = spectral_analyzer.contour_grid(alpha_range, beta_range, args.rho, args.resolution, args.samples)
    path = Path(args.file) if args.file else _out_dir(args) / f"contour_rho{args.rho:g}.csv"
    export_service.write_contour(grid, path)
    if args.xlsx:
        export_service.write_workbook({"contour": export_service.contour_frame(grid)}, path.with_suffix(".xlsx"))
    alpha, beta, radius = grid.argmin_sync()
    print(f"synchronous minimum {radius:.6f} at alpha={alpha:.4f}, beta={beta:.4f}; wrote {path}")
    return 0


def cmd_solve(args) -> int:
    system = _system(args)
    rho = None
    if args.optimal_beta:
        rho = spectral_analyzer.check_assumptions(system).rho
    params = _params(args.alpha, args.beta, args.optimal_beta, rho)
    reference = reference_solution(system) if args.error else None
    trace = solve(args.method, system, np.zeros(system.n), params, args.iterations, args.stride, reference)
    path = _out_dir(args) / f"solve_{args.method}.csv"
    export_service.write_trace(trace, path)
    if args.xlsx:
        export_service.write_workbook({args.method: export_service.trace_frame(trace)}, path.with_suffix(".xlsx"))
    print(f"{args.method}: relative residual {trace.final_rel_resid:.6e} after {trace.iterations} steps; wrote {path}")
    return 0


EXPERIMENT_KEYS = ["mode", "m", "threads", "reps", "target_updates", "alpha", "beta", "optimal_beta", "partition",
                   "seed", "out", "pin_threads", "xlsx", "t_values", "timing_tests", "timing_threads"]


def cmd_experiment(args) -> int:
    config = build_config(ExperimentConfig, args, EXPERIMENT_KEYS)
    paths = experiment_service.run(config)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


SIMULATION_KEYS = ["m", "order", "schedule", "delays", "seeds", "horizon", "stride", "update_prob", "alpha", "beta",
                   "optimal_beta", "seed", "replay_path", "dump_schedule", "out", "xlsx"]


def cmd_simulate(args) -> int:
    config = build_config(SimulationConfig, args, SIMULATION_KEYS)
    system = laplacian_system(config.m, config.seed)
    rho = spectral_analyzer.check_assumptions(system).rho
    if config.beta is not None:
        params = IterParams(alpha=config.alpha, beta=config.beta)
    elif config.order == 2 and config.optimal_beta:
        params = _params(config.alpha, None, True, rho)
    else:
        params = IterParams(alpha=config.alpha)
    width = 2 * system.n if config.order == 2 else system.n
    out = Path(config.out)

    if config.schedule == "bounded_random" and config.order == 2 and not config.dump_schedule:
        table = async_simulator.asynchrony_sweep(system, params, config.delays, config.seeds, config.horizon,
                                                 config.stride, config.update_prob)
        path = export_service.write_sweep(table, out / "sweep.csv")
        if config.xlsx:
            export_service.write_workbook({"sweep": export_service.sweep_frame(table)}, out / "sweep.xlsx")
        for bound, frequency in table.divergence_frequency().items():
            print(f"B={bound}: divergence frequency {frequency:.2f}")
        print(f"wrote {path}")
        return 0

    schedule = Schedule(kind=config.schedule, horizon=config.horizon, max_delay=max(config.delays),
                        update_prob=config.update_prob, seed=config.seeds[0] if config.seeds else 0,
                        replay_path=config.replay_path)
    if config.dump_schedule:
        dump_realization(schedule, width, config.dump_schedule)
    if config.order == 2:
        trace = async_simulator.simulate_second_order(system, params, schedule, config.stride)
    else:
        trace = async_simulator.simulate_first_order(system, params, schedule, config.stride)
    path = export_service.write_sim_trace(trace, out / f"simulate_{config.schedule}.csv")
    print(f"{config.schedule}: final residual {trace.final_residual:.6e}, diverged={trace.diverged}; wrote {path}")
    return 0


def cmd_validate(args) -> int:
    for name in args.files:
        path = Path(name)
        if path.suffix == ".csv":
            summary = export_service.validate_csv(path)
            print(f"{path}: {summary['kind']} ok ({summary['checked']} rows checked)")
        else:
            if args.width is None:
                raise InvalidArgumentError("schedule validation needs --width")
            window = args.max_delay + 1 if args.window else None
            count = validate_realization(read_realization(path), args.width, args.max_delay, window)
            print(f"{path}: schedule ok ({count} instants)")
    return 0


def _pair(text: str, name: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError("expected 'lo,hi'", key=name)
    return lo, hi


# ------------------------------------------------------------------ parser

def _add_common(parser, seed=True):
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--xlsx", action="store_true", default=None, help="also write an .xlsx workbook")
    if seed:
        parser.add_argument("--seed", type=int, default=settings.SEED, help="right-hand side seed")


def _add_beta(parser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--beta", type=float, default=None)
    group.add_argument("--optimal-beta", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="richardson", description="First and second order Richardson solver laboratory")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)
    commands.required = True

    spectra = commands.add_parser("spectra", help="spectral radius and parameter report")
    spectra.add_argument("--m", type=int, default=100)
    spectra.add_argument("--matrix", default=None, help="Matrix Market file to Jacobi-split")
    spectra.add_argument("--rho", type=float, default=None, help="report for a given rho(T) only")
    spectra.add_argument("--alpha", type=float, default=None)
    spectra.add_argument("--power-tol", type=float, default=None)
    _add_beta(spectra)
    spectra.add_argument("--seed", type=int, default=settings.SEED)
    spectra.set_defaults(handler=cmd_spectra)

    contour = commands.add_parser("contour", help="spectral radii on an (alpha, beta) grid")
    contour.add_argument("--rho", type=float, required=True)
    contour.add_argument("--alpha-range", default="0,2")
    contour.add_argument("--beta-range", default="-1,1")
    contour.add_argument("--resolution", type=int, default=101)
    contour.add_argument("--samples", type=int, default=None)
    contour.add_argument("--file", default=None, help="CSV path (default <out>/contour_rho<rho>.csv)")
    _add_common(contour, seed=False)
    contour.set_defaults(handler=cmd_contour)

    solve_cmd = commands.add_parser("solve", help="synchronous solver trace")
    solve_cmd.add_argument("--m", type=int, default=100)
    solve_cmd.add_argument("--matrix", default=None)
    solve_cmd.add_argument("--method", choices=METHODS, default="first")
    solve_cmd.add_argument("--alpha", type=float, default=1.0)
    _add_beta(solve_cmd)
    solve_cmd.add_argument("--iterations", type=int, default=settings.TARGET_UPDATES)
    solve_cmd.add_argument("--stride", type=int, default=None)
    solve_cmd.add_argument("--error", action="store_true", help="record errors against a direct solve")
    _add_common(solve_cmd)
    solve_cmd.set_defaults(handler=cmd_solve)

    experiment = commands.add_parser("experiment", help="thread-count tables and timing curves")
    experiment.add_argument("--config", default=None, help="key = value configuration file")
    experiment.add_argument("--mode", default=None, choices=["table1", "table2", "table3", "timing"])
    experiment.add_argument("--m", type=int, default=None)
    experiment.add_argument("--threads", default=None, help="comma separated thread counts")
    experiment.add_argument("--reps", type=int, default=None)
    experiment.add_argument("--target-updates", type=int, default=None)
    experiment.add_argument("--alpha", type=float, default=None)
    _add_beta(experiment)
    experiment.add_argument("--partition", default=None, help="balanced or unbalanced:R")
    experiment.add_argument("--seed", type=int, default=None)
    experiment.add_argument("--pin-threads", action="store_true", default=None)
    experiment.add_argument("--t-values", default=None, help="comma separated update targets (timing mode)")
    experiment.add_argument("--timing-tests", type=int, default=None)
    experiment.add_argument("--timing-threads", type=int, default=None)
    _add_common(experiment, seed=False)
    experiment.set_defaults(handler=cmd_experiment)

    simulate = commands.add_parser("simulate", help="deterministic asynchrony simulation")
    simulate.add_argument("--config", default=None)
    simulate.add_argument("--m", type=int, default=None)
    simulate.add_argument("--order", type=int, choices=[1, 2], default=None)
    simulate.add_argument("--schedule", default=None, choices=["synchronous", "cyclic", "bounded_random", "replay"])
    simulate.add_argument("--delays", default=None, help="comma separated delay bounds B")
    simulate.add_argument("--seeds", default=None, help="comma separated schedule seeds")
    simulate.add_argument("--horizon", type=int, default=None)
    simulate.add_argument("--stride", type=int, default=None)
    simulate.add_argument("--update-prob", type=float, default=None)
    simulate.add_argument("--alpha", type=float, default=None)
    _add_beta(simulate)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--replay", dest="replay_path", default=None, help="replay a dumped schedule")
    simulate.add_argument("--dump-schedule", default=None, help="write the realization as k;J_k;delays text")
    _add_common(simulate, seed=False)
    simulate.set_defaults(handler=cmd_simulate)

    validate = commands.add_parser("validate", help="recompute derived CSV columns, check schedule dumps")
    validate.add_argument("files", nargs="+")
    validate.add_argument("--width", type=int, default=None, help="components per schedule instant")
    validate.add_argument("--max-delay", type=int, default=0)
    validate.add_argument("--window", action="store_true", help="require an update every max-delay + 1 instants")
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        return args.handler(args)
    except RichardsonError as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
