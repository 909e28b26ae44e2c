import math
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, List, Literal, Optional

from ..errors import InvalidArgumentError
from .params import IterParams


class IterationTrace(BaseModel):
    """Relative residual history of a synchronous run (index 0 is the start, 1.0)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    steps: np.ndarray
    residual_norms: np.ndarray
    error_norms: Optional[np.ndarray] = None
    iterations: int
    final_x: np.ndarray

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.residual_norms.shape != self.steps.shape or self.residual_norms[0] != 1.0:
            raise InvalidArgumentError("trace must start with relative residual 1 and match its step record")
        if self.error_norms is not None and self.error_norms.shape != self.steps.shape:
            raise InvalidArgumentError("error norms must match the step record")
        if self.steps[0] != 0 or self.steps[-1] != self.iterations:
            raise InvalidArgumentError("step record must span 0..iterations")
        return self

    @property
    def final_rel_resid(self) -> float:
        return float(self.residual_norms[-1])


class AsyncConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_threads: int = Field(ge=1)
    partition_mode: Literal["balanced", "unbalanced"] = "balanced"
    unbalanced_ratio: Optional[float] = None
    target_avg_updates: int = Field(default=500, ge=1)
    params: IterParams
    seed: int = 12345
    repetitions: int = Field(default=1, ge=1)
    pin_threads: bool = False

    @model_validator(mode="after")
    def _check_ratio(self):
        if self.partition_mode == "unbalanced":
            if self.unbalanced_ratio is None or not (0.0 < self.unbalanced_ratio < 1.0):
                raise InvalidArgumentError("unbalanced partitions need a ratio in (0, 1)")
        return self


class Partition(BaseModel):
    """Contiguous ownership blocks; ``ranges[t] = (lo, hi)`` for thread ``t``."""

    model_config = ConfigDict(frozen=True)

    n: int
    ranges: List[tuple]

    @model_validator(mode="after")
    def _check_cover(self):
        position = 0
        for lo, hi in self.ranges:
            if lo != position or hi <= lo:
                raise InvalidArgumentError("partition blocks must be nonempty, disjoint and contiguous")
            position = hi
        if position != self.n:
            raise InvalidArgumentError(f"partition covers [0, {position}), expected [0, {self.n})")
        return self

    @property
    def num_threads(self) -> int:
        return len(self.ranges)

    @property
    def sizes(self) -> List[int]:
        return [hi - lo for lo, hi in self.ranges]

    def owner(self) -> np.ndarray:
        owner = np.empty(self.n, dtype=np.int64)
        for t, (lo, hi) in enumerate(self.ranges):
            owner[lo:hi] = t
        return owner


class RunStats(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    threads: int
    update_counts: np.ndarray
    range: int
    rel_resid: float
    failed: bool
    wall_time: float
    final_x: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def _check_integrity(self):
        if self.update_counts.size and self.range != int(self.update_counts.max() - self.update_counts.min()):
            raise InvalidArgumentError("range must equal max - min of the update counts")
        if self.failed != (not math.isfinite(self.rel_resid) or self.rel_resid > 1.0):
            raise InvalidArgumentError("failed must be set exactly when rel_resid > 1")
        return self

    @property
    def total_updates(self) -> int:
        return int(self.update_counts.sum())


class RunRecord(BaseModel):
    """Raw per-run columns from which aggregates are recomputed."""

    threads: int
    run: int
    min_updates: int
    max_updates: int
    range: int
    rel_resid: float
    failed: bool
    wall_time: float


class AggregateStats(BaseModel):
    threads: int
    runs: int
    avg_range: float
    avg_rel_resid: float
    failures: int
    avg_time: float
    sync_time: Optional[float] = None
    sync_rel_resid: Optional[float] = None
    records: List[RunRecord] = []

    @model_validator(mode="after")
    def _check_counts(self):
        if self.failures > self.runs:
            raise InvalidArgumentError("failures cannot exceed runs")
        return self


class Schedule(BaseModel):
    """Update-set and delay generator description."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["synchronous", "cyclic", "bounded_random", "replay"]
    horizon: int = Field(ge=1)
    max_delay: int = Field(default=0, ge=0)
    update_prob: float = Field(default=1.0, gt=0.0, le=1.0)
    seed: int = 0
    replay_path: Optional[str] = None

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "replay" and not self.replay_path:
            raise InvalidArgumentError("replay schedules need a replay_path")
        return self

    @property
    def history_depth(self) -> int:
        return self.max_delay + 1


class SimTrace(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sampled_instants: np.ndarray
    residual_norms: np.ndarray
    diverged: bool
    instants: int
    final_x: Optional[np.ndarray] = None

    @property
    def final_residual(self) -> float:
        return float(self.residual_norms[-1])


class SweepRow(BaseModel):
    max_delay: int
    seed: int
    final_residual: float
    diverged: bool


class SweepTable(BaseModel):
    rows: List[SweepRow] = []

    def divergence_frequency(self) -> Dict[int, float]:
        grouped: Dict[int, List[bool]] = {}
        for row in self.rows:
            grouped.setdefault(row.max_delay, []).append(row.diverged)
        return {delay: sum(flags) / len(flags) for delay, flags in sorted(grouped.items())}
