from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Literal, Optional, Tuple

from ..config import settings


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.replace(";", ",").split(",") if item.strip()]
    return value


def parse_partition(text: str) -> Tuple[str, Optional[float]]:
    """``balanced`` or ``unbalanced:R`` (R may be a fraction such as ``2/3``)."""
    text = text.strip()
    if text == "balanced":
        return "balanced", None
    if text.startswith("unbalanced"):
        _, _, ratio = text.partition(":")
        if not ratio:
            return "unbalanced", 2.0 / 3.0
        if "/" in ratio:
            num, den = ratio.split("/", 1)
            return "unbalanced", float(num) / float(den)
        return "unbalanced", float(ratio)
    raise ValueError(f"unknown partition mode {text!r}")


class ExperimentConfig(BaseModel):
    """Validated configuration of ``experiment`` runs (key = value file + flags)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: Literal["table1", "table2", "table3", "timing"] = "table1"
    m: int = Field(default=100, ge=1)
    threads: List[int] = list(range(1, 21))
    reps: int = Field(default=settings.REPETITIONS, ge=1)
    target_updates: int = Field(default=settings.TARGET_UPDATES, ge=1)
    alpha: float = 1.0
    beta: Optional[float] = None
    optimal_beta: bool = False
    partition: str = "balanced"
    seed: int = settings.SEED
    out: str = settings.OUTPUT_DIR
    pin_threads: bool = settings.PIN_THREADS
    xlsx: bool = False
    # residual-vs-time protocol
    t_values: List[int] = [50, 100, 200, 300, 400, 500, 750, 1000]
    timing_tests: int = Field(default=20, ge=1)
    timing_threads: int = Field(default=10, ge=1)

    @field_validator("threads", "t_values", mode="before")
    @classmethod
    def _list_of_ints(cls, value):
        return _split_list(value)

    @field_validator("threads", "t_values")
    @classmethod
    def _positive_entries(cls, value):
        if not value or any(item < 1 for item in value):
            raise ValueError("must be a nonempty list of positive integers")
        return value

    @field_validator("partition")
    @classmethod
    def _valid_partition(cls, value):
        mode, ratio = parse_partition(value)
        if ratio is not None and not (0.0 < ratio < 1.0):
            raise ValueError("unbalanced ratio must lie in (0, 1)")
        return value

    @model_validator(mode="after")
    def _mode_defaults(self):
        if self.beta is not None and self.optimal_beta:
            raise ValueError("beta and optimal_beta are mutually exclusive")
        return self

    @property
    def partition_mode(self) -> Tuple[str, Optional[float]]:
        return parse_partition(self.partition)


class SimulationConfig(BaseModel):
    """Validated configuration of ``simulate`` sweeps."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    m: int = Field(default=10, ge=1)
    order: int = Field(default=2, ge=1, le=2)
    schedule: Literal["synchronous", "cyclic", "bounded_random", "replay"] = "bounded_random"
    delays: List[int] = [0, 5, 20]
    seeds: List[int] = [0, 1, 2, 3, 4]
    horizon: int = Field(default=2000, ge=1)
    stride: int = Field(default=10, ge=1)
    update_prob: float = Field(default=0.5, gt=0.0, le=1.0)
    alpha: float = 1.0
    beta: Optional[float] = None
    optimal_beta: bool = True
    seed: int = settings.SEED
    replay_path: Optional[str] = None
    dump_schedule: Optional[str] = None
    out: str = settings.OUTPUT_DIR
    xlsx: bool = False

    @field_validator("delays", "seeds", mode="before")
    @classmethod
    def _list_of_ints(cls, value):
        return _split_list(value)

    @field_validator("delays")
    @classmethod
    def _nonempty(cls, value):
        if not value or any(item < 0 for item in value):
            raise ValueError("must be a nonempty list of nonnegative integers")
        return value
