"""Experiment protocols: thread-count tables and the residual-versus-time curves."""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ..async_runtime import async_runner
from ..models import AggregateStats, AsyncConfig, ExperimentConfig, IterParams, SpectrumBounds, SplittingSystem
from ..sparse_core import laplacian_system
from ..spectral import spectral_analyzer
from ..sync_solvers import first_order, second_order
from .export_service import export_service

logger = logging.getLogger(__name__)

TABLE3_BETA = 0.9


class ExperimentService:
    def __init__(self):
        self.timing_columns = ["partition", "order", "target_updates", "test", "wall_time", "rel_resid"]

    def resolve_params(self, config: ExperimentConfig, rho: float, second_order_run: Optional[bool] = None) -> IterParams:
        """alpha/beta of a run: explicit beta, the optimal beta, or the mode's default."""
        if second_order_run is None:
            second_order_run = config.mode in ("table2", "table3") or config.optimal_beta or config.beta is not None
        if not second_order_run:
            return IterParams(alpha=config.alpha, beta=0.0)
        if config.beta is not None:
            return IterParams(alpha=config.alpha, beta=config.beta)
        if config.mode == "table3" and not config.optimal_beta:
            return IterParams(alpha=config.alpha, beta=TABLE3_BETA)
        optimal = spectral_analyzer.optimal_second_order(SpectrumBounds.from_rho(rho))
        return IterParams(alpha=optimal.alpha, beta=optimal.beta)

    def build_system(self, config: ExperimentConfig) -> SplittingSystem:
        system = laplacian_system(config.m, config.seed)
        system.require_unit_diagonal()
        system.require_nonnegative()
        return system

    def async_config(self, config: ExperimentConfig, threads: int, params: IterParams,
                     target: Optional[int] = None, repetitions: Optional[int] = None,
                     partition: Optional[tuple] = None) -> AsyncConfig:
        mode, ratio = config.partition_mode if partition is None else partition
        return AsyncConfig(
            num_threads=threads,
            partition_mode=mode,
            unbalanced_ratio=ratio,
            target_avg_updates=config.target_updates if target is None else target,
            params=params,
            seed=config.seed,
            repetitions=config.reps if repetitions is None else repetitions,
            pin_threads=config.pin_threads,
        )

    def run(self, config: ExperimentConfig) -> Dict[str, Path]:
        if config.mode == "timing":
            return self.run_timing(config)
        return self.run_table(config)

    def run_table(self, config: ExperimentConfig) -> Dict[str, Path]:
        """Sync baseline plus ``reps`` asynchronous runs per thread count."""
        system = self.build_system(config)
        rho = math.cos(math.pi / (config.m + 1))
        params = self.resolve_params(config, rho)
        out = Path(config.out) / config.mode
        logger.info(f"{config.mode}: m={config.m}, alpha={params.alpha}, beta={params.beta:.6f}, "
                    f"threads={config.threads}, reps={config.reps}")

        x0 = np.zeros(system.n)
        if params.is_first_order:
            sync_trace = first_order(system, x0, params, config.target_updates)
        else:
            sync_trace = second_order(system, x0, params, config.target_updates)
        logger.info(f"serial synchronous rel resid after {config.target_updates} steps: {sync_trace.final_rel_resid:.6e}")

        aggregates: List[AggregateStats] = []
        for threads in config.threads:
            aggregates.append(async_runner.repeat_runs(system, self.async_config(config, threads, params),
                                                       sync_iterations=config.target_updates))

        paths = {
            "aggregate": export_service.write_aggregates(aggregates, out / "aggregate.csv"),
            "runs": export_service.write_runs(aggregates, config.seed, out / "runs.csv"),
        }
        results = {
            "alpha": params.alpha,
            "beta": params.beta,
            "rho": rho,
            "sync_rel_resid": sync_trace.final_rel_resid,
            "async_condition": spectral_analyzer.async_condition_holds(params, rho),
        }
        paths["metadata"] = export_service.write_metadata(
            {"experiment": config.model_dump(), "results": results}, out / "metadata.json")
        if config.xlsx:
            paths["workbook"] = export_service.write_workbook({
                "aggregate": export_service.aggregate_frame(aggregates),
                "runs": export_service.runs_frame(aggregates, config.seed),
            }, out / f"{config.mode}.xlsx")
        return paths

    def timing_rows(self, system: SplittingSystem, config: ExperimentConfig, params: IterParams,
                    partition: tuple) -> List[Dict[str, Any]]:
        """First order points are averaged over the tests of each t, second order points kept individually."""
        label = partition[0] if partition[1] is None else f"unbalanced:{partition[1]:.4g}"
        order = 1 if params.is_first_order else 2
        rows = []
        for target in config.t_values:
            async_config = self.async_config(config, config.timing_threads, params, target=target,
                                             repetitions=1, partition=partition)
            runs = [async_runner.run_async(system, async_config) for _ in range(config.timing_tests)]
            if order == 1:
                rows.append({"partition": label, "order": order, "target_updates": target, "test": None,
                             "wall_time": float(np.mean([r.wall_time for r in runs])),
                             "rel_resid": float(np.mean([r.rel_resid for r in runs]))})
            else:
                rows.extend({"partition": label, "order": order, "target_updates": target, "test": i,
                             "wall_time": r.wall_time, "rel_resid": r.rel_resid} for i, r in enumerate(runs))
            logger.info(f"timing {label} order {order} t={target}: done {config.timing_tests} tests")
        return rows

    def run_timing(self, config: ExperimentConfig) -> Dict[str, Path]:
        """Residual against wall time for balanced and unbalanced partitions."""
        system = self.build_system(config)
        rho = math.cos(math.pi / (config.m + 1))
        _, ratio = config.partition_mode
        partitions = [("balanced", None), ("unbalanced", ratio if ratio is not None else 2.0 / 3.0)]
        rows = []
        for partition in partitions:
            rows.extend(self.timing_rows(system, config, self.resolve_params(config, rho, False), partition))
            rows.extend(self.timing_rows(system, config, self.resolve_params(config, rho, True), partition))

        out = Path(config.out) / "timing"
        frame = pd.DataFrame(rows, columns=self.timing_columns)
        paths = {"timing": export_service.write_frame(frame, out / "timing.csv")}
        paths["metadata"] = export_service.write_metadata({"experiment": config.model_dump()}, out / "metadata.json")
        if config.xlsx:
            paths["workbook"] = export_service.write_workbook({"timing": frame}, out / "timing.xlsx")
        return paths


# Global experiment service instance
experiment_service = ExperimentService()
