# Models package
from .system import SparseMatrix, SplittingSystem
from .params import (
    IterParams,
    OptimalParams,
    PerronWeight,
    RadiusEstimate,
    SpectralGrid,
    SpectrumBounds,
    SystemSpectrum,
)
from .results import (
    AggregateStats,
    AsyncConfig,
    IterationTrace,
    Partition,
    RunRecord,
    RunStats,
    Schedule,
    SimTrace,
    SweepRow,
    SweepTable,
)
from .experiment import ExperimentConfig, SimulationConfig, parse_partition

__all__ = [
    "SparseMatrix",
    "SplittingSystem",
    "IterParams",
    "OptimalParams",
    "PerronWeight",
    "RadiusEstimate",
    "SpectralGrid",
    "SpectrumBounds",
    "SystemSpectrum",
    "AggregateStats",
    "AsyncConfig",
    "IterationTrace",
    "Partition",
    "RunRecord",
    "RunStats",
    "Schedule",
    "SimTrace",
    "SweepRow",
    "SweepTable",
    "ExperimentConfig",
    "SimulationConfig",
    "parse_partition",
]
