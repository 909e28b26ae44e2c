import json
import logging
import math
import platform
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Union

import numba
import numpy as np
import pandas as pd
import psutil
import scipy
from openpyxl.styles import Alignment, Font, PatternFill

from ..errors import InvalidArgumentError, OutputError
from ..models import AggregateStats, IterationTrace, SimTrace, SpectralGrid, SweepTable

logger = logging.getLogger(__name__)

AGGREGATE_COLUMNS = ["threads", "avg_range", "avg_rel_resid", "failures", "async_time", "sync_time"]
RUN_COLUMNS = ["threads", "run", "seed", "min_updates", "max_updates", "range", "rel_resid", "failed", "wall_time"]
CONTOUR_COLUMNS = ["alpha", "beta", "radius_sync", "radius_async"]


class ExportService:
    """CSV artifacts, optional workbook and run metadata."""

    def __init__(self):
        self.float_format = "%.17g"
        self.time_decimals = 6
        self.header_fill = PatternFill(start_color="366092", end_color="366092", fill_type="solid")
        self.header_font = Font(color="FFFFFF", bold=True)

    def write_frame(self, frame: pd.DataFrame, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False, float_format=self.float_format)
        except OSError as e:
            raise OutputError(f"cannot write {path}: {e}")
        logger.info(f"wrote {len(frame)} rows to {path}")
        return path

    # ------------------------------------------------------------- frames

    def contour_frame(self, grid: SpectralGrid) -> pd.DataFrame:
        """Row-major in beta then alpha; undefined async radii stay NaN (empty CSV field)."""
        betas, alphas = np.meshgrid(grid.beta_values, grid.alpha_values, indexing="ij")
        return pd.DataFrame({
            "alpha": alphas.ravel(),
            "beta": betas.ravel(),
            "radius_sync": grid.radius_sync.ravel(),
            "radius_async": grid.radius_async.ravel(),
        }, columns=CONTOUR_COLUMNS)

    def trace_frame(self, trace: IterationTrace) -> pd.DataFrame:
        data = {"k": trace.steps, "rel_resid": trace.residual_norms}
        if trace.error_norms is not None:
            data["error_norm"] = trace.error_norms
        return pd.DataFrame(data)

    def sim_trace_frame(self, trace: SimTrace) -> pd.DataFrame:
        return pd.DataFrame({"k": trace.sampled_instants, "rel_resid": trace.residual_norms})

    def aggregate_frame(self, aggregates: List[AggregateStats]) -> pd.DataFrame:
        rows = [{
            "threads": a.threads,
            "avg_range": a.avg_range,
            "avg_rel_resid": a.avg_rel_resid,
            "failures": a.failures,
            "async_time": round(a.avg_time, self.time_decimals),
            "sync_time": None if a.sync_time is None else round(a.sync_time, self.time_decimals),
        } for a in aggregates]
        return pd.DataFrame(rows, columns=AGGREGATE_COLUMNS)

    def runs_frame(self, aggregates: List[AggregateStats], seed: int) -> pd.DataFrame:
        rows = [{
            "threads": r.threads,
            "run": r.run,
            "seed": seed,
            "min_updates": r.min_updates,
            "max_updates": r.max_updates,
            "range": r.range,
            "rel_resid": r.rel_resid,
            "failed": int(r.failed),
            "wall_time": r.wall_time,
        } for a in aggregates for r in a.records]
        return pd.DataFrame(rows, columns=RUN_COLUMNS)

    def sweep_frame(self, table: SweepTable) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in table.rows],
                            columns=["max_delay", "seed", "final_residual", "diverged"])

    # ------------------------------------------------------------- writers

    def write_contour(self, grid: SpectralGrid, path) -> Path:
        return self.write_frame(self.contour_frame(grid), path)

    def write_trace(self, trace: IterationTrace, path) -> Path:
        return self.write_frame(self.trace_frame(trace), path)

    def write_sim_trace(self, trace: SimTrace, path) -> Path:
        return self.write_frame(self.sim_trace_frame(trace), path)

    def write_aggregates(self, aggregates: List[AggregateStats], path) -> Path:
        frame = self.aggregate_frame(aggregates)
        # times keep six decimals in the table layout
        frame["async_time"] = frame["async_time"].map(lambda v: f"{v:.{self.time_decimals}f}")
        frame["sync_time"] = frame["sync_time"].map(lambda v: "" if pd.isna(v) else f"{v:.{self.time_decimals}f}")
        return self.write_frame(frame, path)

    def write_runs(self, aggregates: List[AggregateStats], seed: int, path) -> Path:
        return self.write_frame(self.runs_frame(aggregates, seed), path)

    def write_sweep(self, table: SweepTable, path) -> Path:
        return self.write_frame(self.sweep_frame(table), path)

    def write_workbook(self, sheets: Dict[str, pd.DataFrame], path) -> Path:
        """One sheet per table with a styled header row."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with pd.ExcelWriter(path, engine="openpyxl") as writer:
                for name, frame in sheets.items():
                    frame.to_excel(writer, sheet_name=name[:31], index=False)
                    sheet = writer.sheets[name[:31]]
                    for cell in sheet[1]:
                        cell.fill = self.header_fill
                        cell.font = self.header_font
                        cell.alignment = Alignment(horizontal="center")
                    for column in sheet.columns:
                        width = max(len(str(cell.value)) if cell.value is not None else 0 for cell in column)
                        sheet.column_dimensions[column[0].column_letter].width = min(width + 2, 40)
        except OSError as e:
            raise OutputError(f"cannot write {path}: {e}")
        logger.info(f"wrote workbook {path} ({len(sheets)} sheets)")
        return path

    def hardware_metadata(self) -> Dict[str, Any]:
        memory = psutil.virtual_memory()
        return {
            "platform": platform.platform(),
            "python": platform.python_version(),
            "processor": platform.processor(),
            "physical_cores": psutil.cpu_count(logical=False),
            "logical_cores": psutil.cpu_count(logical=True),
            "memory_bytes": memory.total,
        }

    def write_metadata(self, config: Dict[str, Any], path) -> Path:
        payload = {
            "created": datetime.now().isoformat(timespec="seconds"),
            "config": config,
            "hardware": self.hardware_metadata(),
            "packages": {
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "numba": numba.__version__,
                "pandas": pd.__version__,
            },
        }
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(payload, indent=2, default=str))
        except OSError as e:
            raise OutputError(f"cannot write {path}: {e}")
        return path

    # ------------------------------------------------------------- validation

    def validate_csv(self, path) -> Dict[str, Any]:
        """
        Re-read a produced CSV and recompute derived columns from raw ones.

        Per-run files: ``range == max_updates - min_updates`` and
        ``failed == (rel_resid > 1)`` on every row. Aggregate files written
        next to a ``runs.csv`` are checked against it as well.
        """
        path = Path(path)
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError) as e:
            raise OutputError(f"cannot read {path}: {e}")

        columns = list(frame.columns)
        if columns == RUN_COLUMNS:
            return self._validate_runs(frame, path)
        if columns == AGGREGATE_COLUMNS:
            runs_path = path.with_name("runs.csv")
            if runs_path.exists():
                return self._validate_aggregates(frame, pd.read_csv(runs_path), path)
            return {"file": str(path), "kind": "aggregate", "rows": len(frame), "checked": 0}
        if columns == CONTOUR_COLUMNS:
            bad = frame["radius_sync"].lt(0).sum() + frame["radius_async"].dropna().lt(0).sum()
            if bad:
                raise InvalidArgumentError(f"{path}: {bad} negative spectral radii")
            return {"file": str(path), "kind": "contour", "rows": len(frame), "checked": len(frame)}
        raise InvalidArgumentError(f"{path}: unrecognized CSV layout {columns}")

    def _validate_runs(self, frame: pd.DataFrame, path: Path) -> Dict[str, Any]:
        ranges = frame["max_updates"] - frame["min_updates"]
        mismatched = frame.index[ranges != frame["range"]].tolist()
        if mismatched:
            raise InvalidArgumentError(f"{path}: range column disagrees with update counts in rows {mismatched[:5]}")
        failed = frame["rel_resid"].astype(float) > 1.0
        mismatched = frame.index[failed.astype(int) != frame["failed"].astype(int)].tolist()
        if mismatched:
            raise InvalidArgumentError(f"{path}: failed column disagrees with rel_resid in rows {mismatched[:5]}")
        return {"file": str(path), "kind": "runs", "rows": len(frame), "checked": len(frame)}

    def _validate_aggregates(self, frame: pd.DataFrame, runs: pd.DataFrame, path: Path) -> Dict[str, Any]:
        self._validate_runs(runs, path.with_name("runs.csv"))
        for _, row in frame.iterrows():
            group = runs[runs["threads"] == row["threads"]]
            failures = int((group["rel_resid"].astype(float) > 1.0).sum())
            if failures != int(row["failures"]):
                raise InvalidArgumentError(
                    f"{path}: threads={int(row['threads'])} reports {int(row['failures'])} failures, runs give {failures}")
            avg_range = float(group["range"].mean())
            if not math.isclose(avg_range, float(row["avg_range"]), rel_tol=1e-6, abs_tol=1e-9):
                raise InvalidArgumentError(
                    f"{path}: threads={int(row['threads'])} avg_range {row['avg_range']} != {avg_range}")
        return {"file": str(path), "kind": "aggregate", "rows": len(frame), "checked": len(frame)}


# Global export service instance
export_service = ExportService()
