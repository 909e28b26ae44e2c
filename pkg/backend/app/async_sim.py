"""
Deterministic simulation of asynchronous iterations.

At instant ``k`` the components in ``J_k`` are recomputed from values read at
instants ``k - 1 - d_j`` (one delay per source component), the others are
carried forward. The last ``B + 1`` global iterates are kept in a ring buffer.
The second order method runs on the doubled state ``(current, previous)``.
"""

import logging
import math
import numpy as np
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .config import settings
from .errors import OutputError, ScheduleContractError
from .kernels import gather_delayed, sim_first_order_update, sim_second_order_update
from .models import IterParams, Schedule, SimTrace, SplittingSystem, SweepRow, SweepTable
from .sparse_core import as_real_vector, initial_residual_norm, relative_residual

logger = logging.getLogger(__name__)

Instant = Tuple[int, np.ndarray, np.ndarray]

_CHUNK = 256


def _bounded_random(schedule: Schedule, width: int) -> Iterator[Instant]:
    rng = np.random.default_rng(schedule.seed)
    bound = schedule.max_delay
    last = np.zeros(width, dtype=np.int64)
    k = 1
    while k <= schedule.horizon:
        rows = min(_CHUNK, schedule.horizon - k + 1)
        membership = rng.random((rows, width))
        delay_draws = rng.random((rows, width))
        for row in range(rows):
            instant = k + row
            # idle for B instants means the next instant must update it
            chosen = (membership[row] < schedule.update_prob) | (instant - last >= bound + 1)
            members = np.flatnonzero(chosen).astype(np.int64)
            last[members] = instant
            cap = min(bound, instant - 1)
            delays = np.minimum((delay_draws[row] * (cap + 1)).astype(np.int64), cap)
            yield instant, members, delays
        k += rows


def _replay(schedule: Schedule, width: int) -> Iterator[Instant]:
    for instant, members, delays in read_realization(schedule.replay_path):
        if instant > schedule.horizon:
            break
        if delays.shape[0] != width:
            raise ScheduleContractError(f"instant {instant}: {delays.shape[0]} delays for {width} components")
        yield instant, members, delays


def realize(schedule: Schedule, width: int) -> Iterator[Instant]:
    """Update sets and per-component read delays for instants ``1..horizon``."""
    if schedule.kind == "synchronous":
        everyone = np.arange(width, dtype=np.int64)
        fresh = np.zeros(width, dtype=np.int64)
        return ((k, everyone, fresh) for k in range(1, schedule.horizon + 1))
    if schedule.kind == "cyclic":
        fresh = np.zeros(width, dtype=np.int64)
        return ((k, np.array([(k - 1) % width], dtype=np.int64), fresh) for k in range(1, schedule.horizon + 1))
    if schedule.kind == "bounded_random":
        return _bounded_random(schedule, width)
    return _replay(schedule, width)


def format_instant(instant: int, members: np.ndarray, delays: np.ndarray) -> str:
    return f"{instant};{','.join(map(str, members.tolist()))};{','.join(map(str, delays.tolist()))}"


def dump_realization(schedule: Schedule, width: int, path: Union[str, Path]) -> int:
    """Write the ``k;J_k;delays`` text form of a realization; returns the number of instants."""
    count = 0
    try:
        with open(path, "w") as handle:
            for instant, members, delays in realize(schedule, width):
                handle.write(format_instant(instant, members, delays) + "\n")
                count += 1
    except OSError as e:
        raise OutputError(f"cannot write schedule to {path}: {e}")
    logger.info(f"dumped {count} instants of a {schedule.kind} schedule to {path}")
    return count


def _parse_ints(text: str) -> np.ndarray:
    return np.array([int(v) for v in text.split(",") if v != ""], dtype=np.int64)


def read_realization(path: Union[str, Path]) -> Iterator[Instant]:
    try:
        handle = open(path)
    except OSError as e:
        raise OutputError(f"cannot read schedule {path}: {e}")
    with handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(";")
            if len(parts) != 3:
                raise ScheduleContractError(f"line {line_no}: expected 'k;J_k;delays'")
            try:
                yield int(parts[0]), _parse_ints(parts[1]), _parse_ints(parts[2])
            except ValueError:
                raise ScheduleContractError(f"line {line_no}: malformed integers")


def validate_realization(realization: Iterable[Instant], width: int, max_delay: int,
                         window: Optional[int] = None) -> int:
    """
    Check ``s_j(k) <= k - 1``, delays within ``max_delay`` and, when ``window``
    is given, an update of every component at least once per ``window`` instants.
    Returns the number of instants checked.
    """
    last = np.zeros(width, dtype=np.int64)
    expected = 1
    for instant, members, delays in realization:
        if instant != expected:
            raise ScheduleContractError(f"instant {instant} out of sequence, expected {expected}")
        expected += 1
        if delays.shape[0] != width:
            raise ScheduleContractError(f"instant {instant}: {delays.shape[0]} delays for {width} components")
        if delays.size and (delays.min() < 0 or delays.max() > min(max_delay, instant - 1)):
            raise ScheduleContractError(f"instant {instant}: read delay outside [0, {min(max_delay, instant - 1)}]")
        if members.size and (members.min() < 0 or members.max() >= width):
            raise ScheduleContractError(f"instant {instant}: update set index out of range")
        last[members] = instant
        if window is not None:
            stale = np.flatnonzero(instant - last >= window)
            if stale.size:
                raise ScheduleContractError(
                    f"instant {instant}: component {int(stale[0])} idle for {window} instants")
    return expected - 1


class AsyncSimulator:
    """Single-threaded, seed-deterministic runs of the asynchronous model."""

    def __init__(self):
        self.divergence_cap = settings.DIVERGENCE_CAP

    def _run(self, system: SplittingSystem, params: IterParams, schedule: Schedule, stride: int,
             second: bool, x0=None, stop_below: Optional[float] = None) -> SimTrace:
        n = system.n
        A = system.A
        width = 2 * n if second else n
        depth = schedule.history_depth
        x0 = np.zeros(n) if x0 is None else as_real_vector(x0, n)
        normalizer = initial_residual_norm(system, x0)
        stride = max(1, stride)

        history = np.empty((depth, width))
        history[:] = np.concatenate([x0, x0]) if second else x0
        read = np.empty(width)
        started = np.zeros(n, dtype=np.bool_)

        sampled = [0]
        residuals = [1.0]
        diverged = False
        executed = 0
        for instant, members, delays in realize(schedule, width):
            if delays.size and delays.max() > min(depth - 1, instant - 1):
                raise ScheduleContractError(
                    f"instant {instant}: delay {int(delays.max())} beyond the stored history of {depth}")
            gather_delayed(history, instant, delays, read)
            out = history[instant % depth]
            out[:] = history[(instant - 1) % depth]
            if second:
                sim_second_order_update(A.row_start, A.col_index, A.value, system.c, read, members, out,
                                        params.alpha, params.beta, started, n)
            else:
                sim_first_order_update(A.row_start, A.col_index, A.value, system.c, read, members, out,
                                       params.alpha)
            executed = instant

            if instant % stride == 0:
                current = out[:n]
                rel = relative_residual(system, current, normalizer) if np.all(np.isfinite(current)) else math.inf
                sampled.append(instant)
                residuals.append(rel)
                if not math.isfinite(rel) or rel > self.divergence_cap:
                    diverged = True
                    break
                if stop_below is not None and rel < stop_below:
                    break

        final = history[executed % depth][:n].copy()
        logger.debug(f"{schedule.kind} schedule (B={schedule.max_delay}, seed={schedule.seed}): "
                     f"{executed} instants, final residual {residuals[-1]:.3e}, diverged={diverged}")
        return SimTrace(sampled_instants=np.array(sampled, dtype=np.int64), residual_norms=np.array(residuals),
                        diverged=diverged, instants=executed, final_x=final)

    def simulate_first_order(self, system: SplittingSystem, params: IterParams, schedule: Schedule,
                             stride: int = 1, x0=None, stop_below: Optional[float] = None) -> SimTrace:
        """``G(x) = x + alpha (c - A x)`` applied componentwise under ``schedule``."""
        return self._run(system, params, schedule, stride, second=False, x0=x0, stop_below=stop_below)

    def simulate_second_order(self, system: SplittingSystem, params: IterParams, schedule: Schedule,
                              stride: int = 1, x0=None, stop_below: Optional[float] = None) -> SimTrace:
        """Componentwise doubled fixed point; the previous-value block is scheduled like the current one."""
        return self._run(system, params, schedule, stride, second=True, x0=x0, stop_below=stop_below)

    def asynchrony_sweep(self, system: SplittingSystem, params: IterParams, B_values: Sequence[int],
                         seeds: Sequence[int], horizon: int, stride: int = 10, update_prob: float = 0.5,
                         stop_below: Optional[float] = None) -> SweepTable:
        """Second order runs over a (delay bound, seed) grid."""
        rows: List[SweepRow] = []
        for bound in B_values:
            for seed in seeds:
                schedule = Schedule(kind="bounded_random", horizon=horizon, max_delay=bound,
                                    update_prob=update_prob, seed=seed)
                trace = self.simulate_second_order(system, params, schedule, stride, stop_below=stop_below)
                rows.append(SweepRow(max_delay=bound, seed=seed, final_residual=trace.final_residual,
                                     diverged=trace.diverged))
        table = SweepTable(rows=rows)
        for bound, frequency in table.divergence_frequency().items():
            logger.info(f"B={bound}: divergence frequency {frequency:.2f}")
        return table


# Global simulator instance
async_simulator = AsyncSimulator()

simulate_first_order = async_simulator.simulate_first_order
simulate_second_order = async_simulator.simulate_second_order
asynchrony_sweep = async_simulator.asynchrony_sweep
