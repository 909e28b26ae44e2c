import math
import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from typing import List, Optional

from ..errors import InvalidArgumentError


class SpectrumBounds(BaseModel):
    """Interval ``[a, b]`` containing spec(A), ``0 < a <= b``."""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float

    @model_validator(mode="after")
    def _check_interval(self):
        if not (0.0 < self.a <= self.b) or not math.isfinite(self.b):
            raise InvalidArgumentError(f"spectrum bounds need 0 < a <= b, got a={self.a}, b={self.b}")
        return self

    @classmethod
    def from_rho(cls, rho: float) -> "SpectrumBounds":
        """Jacobi setting: spec(A) in [1 - rho, 1 + rho]."""
        if not (0.0 <= rho < 1.0):
            raise InvalidArgumentError(f"rho must lie in [0, 1), got {rho}")
        return cls(a=1.0 - rho, b=1.0 + rho)


class IterParams(BaseModel):
    """Richardson parameters; ``beta == 0`` is the first order method."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    beta: float = 0.0
    alpha_schedule: Optional[List[float]] = None
    alpha_bar: Optional[float] = None

    @model_validator(mode="after")
    def _check_values(self):
        if not math.isfinite(self.alpha) or not math.isfinite(self.beta):
            raise InvalidArgumentError("alpha and beta must be finite")
        if self.alpha_schedule is not None:
            if len(self.alpha_schedule) == 0:
                raise InvalidArgumentError("alpha_schedule must not be empty")
            bound = self.alpha_bar if self.alpha_bar is not None else max(self.alpha_schedule)
            for value in self.alpha_schedule:
                if not (0.0 < value <= bound):
                    raise InvalidArgumentError(f"alpha_schedule entry {value} outside (0, {bound}]")
        return self

    @property
    def is_first_order(self) -> bool:
        return self.beta == 0.0

    def alpha_at(self, k: int) -> float:
        """Damping of step ``k``; a schedule shorter than the run wraps cyclically."""
        if self.alpha_schedule is None:
            return self.alpha
        return self.alpha_schedule[k % len(self.alpha_schedule)]

    def schedule_bound(self) -> float:
        if self.alpha_schedule is None:
            return self.alpha
        return self.alpha_bar if self.alpha_bar is not None else max(self.alpha_schedule)


class OptimalParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    beta: float
    q: float

    @model_validator(mode="after")
    def _check_factor(self):
        if not (0.0 <= self.q < 1.0):
            raise InvalidArgumentError(f"convergence factor must lie in [0, 1), got {self.q}")
        return self

    def as_iter_params(self) -> IterParams:
        return IterParams(alpha=self.alpha, beta=self.beta)


class RadiusEstimate(BaseModel):
    """Power iteration result; ``vector`` is the final normalized iterate."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: float
    converged: bool
    iterations: int
    vector: Optional[np.ndarray] = None


class PerronWeight(BaseModel):
    """Positive ``w`` with ``T w <= rho_eps w`` verified componentwise."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w: np.ndarray
    epsilon: float
    rho_eps: float
    delta: float

    @field_validator("w", mode="before")
    @classmethod
    def _positive(cls, v):
        w = np.ascontiguousarray(v, dtype=np.float64)
        if not np.all(w > 0.0):
            raise InvalidArgumentError("Perron weight must be strictly positive")
        w.flags.writeable = False
        return w


class SpectralGrid(BaseModel):
    """Radii on a uniform (alpha, beta) grid; rows index beta, columns alpha."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    alpha_values: np.ndarray
    beta_values: np.ndarray
    radius_sync: np.ndarray
    radius_async: np.ndarray
    rho: float

    @model_validator(mode="after")
    def _check_shapes(self):
        shape = (self.beta_values.shape[0], self.alpha_values.shape[0])
        if self.radius_sync.shape != shape or self.radius_async.shape != shape:
            raise InvalidArgumentError(f"radius arrays must have shape {shape}")
        defined = ~np.isnan(self.radius_async)
        if np.any(self.radius_sync < 0.0) or np.any(self.radius_async[defined] < 0.0):
            raise InvalidArgumentError("spectral radii must be nonnegative")
        return self

    def argmin_sync(self):
        """``(alpha, beta, radius)`` at the grid minimum of the synchronous radius."""
        row, col = np.unravel_index(np.argmin(self.radius_sync), self.radius_sync.shape)
        return float(self.alpha_values[col]), float(self.beta_values[row]), float(self.radius_sync[row, col])


class SystemSpectrum(BaseModel):
    """Spectral data of a splitting: estimated rho(T) and the Jacobi bounds (1 - rho, 1 + rho)."""

    model_config = ConfigDict(frozen=True)

    rho: float
    converged: bool
    exact_rho: Optional[float] = None

    @property
    def bounds(self) -> SpectrumBounds:
        return SpectrumBounds.from_rho(self.rho)
