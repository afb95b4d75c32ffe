"""Representative-day time grid and trip-block indicator matrices.

Interval indices are 1-based throughout, matching the usual way schedules are
written down: interval ``t`` covers ``[(t-1)*dT, t*dT)`` hours after the
reference time. Index ``T_d + 1`` is the augmented end-of-day index whose
departure/arrival indicators wrap onto index 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import BlockOutOfDay, DegenerateBlock, ScenarioError

# guards floor/ceil against representation noise only (e.g. 0.7/0.1)
_FP_GUARD = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    num_days: int
    intervals_per_day: int
    interval_hours: float
    reference_time: float = 3.0
    day_weights: tuple[float, ...] = ()
    year_length: float = 365.0

    def __post_init__(self):
        if self.interval_hours <= 0:
            raise ScenarioError("interval_hours must be > 0")
        if self.num_days < 1 or self.intervals_per_day < 1:
            raise ScenarioError("grid needs at least one day and one interval")
        if not math.isclose(self.intervals_per_day * self.interval_hours, 24.0, abs_tol=1e-9):
            raise ScenarioError(
                f"{self.intervals_per_day} intervals x {self.interval_hours} h does not cover 24 h"
            )
        weights = tuple(float(w) for w in self.day_weights) or tuple(
            [self.year_length / self.num_days] * self.num_days
        )
        if len(weights) != self.num_days:
            raise ScenarioError(f"expected {self.num_days} day weights, got {len(weights)}")
        if any(w < 0 for w in weights):
            raise ScenarioError("day weights must be nonnegative")
        if not math.isclose(sum(weights), self.year_length, rel_tol=1e-9):
            raise ScenarioError(f"day weights sum to {sum(weights)}, expected {self.year_length}")
        object.__setattr__(self, "day_weights", weights)

    @classmethod
    def uniform(cls, num_days: int, intervals_per_day: int, reference_time: float = 3.0, **kw) -> "TimeGrid":
        return cls(num_days, intervals_per_day, 24.0 / intervals_per_day, reference_time, **kw)

    @property
    def days(self) -> range:
        return range(self.num_days)

    @property
    def intervals(self) -> range:
        """1..T_d"""
        return range(1, self.intervals_per_day + 1)

    def clock_to_offset(self, clock_hours: float) -> float:
        """Hours after the reference time, wrapped into [0, 24)."""
        return (clock_hours - self.reference_time) % 24.0

    def interval_of_offset(self, offset_hours: float) -> int:
        return int(math.floor(offset_hours / self.interval_hours + _FP_GUARD)) + 1

    def intervals_for_clock_window(self, start_clock: float, end_clock: float) -> list[int]:
        """Intervals whose start lies in the clock window ``[start, end)``."""
        out = []
        for t in self.intervals:
            clock = (self.reference_time + (t - 1) * self.interval_hours) % 24.0
            if start_clock <= end_clock:
                inside = start_clock - _FP_GUARD <= clock < end_clock - _FP_GUARD
            else:
                inside = clock >= start_clock - _FP_GUARD or clock < end_clock - _FP_GUARD
            if inside:
                out.append(t)
        return out


@dataclass(frozen=True)
class TripBlock:
    """A return-to-depot trip sequence; times are hours after the reference."""

    id: str
    day: int
    start_time: float
    end_time: float
    distance_km: float

    def __post_init__(self):
        if not self.start_time < self.end_time:
            raise ScenarioError(f"block {self.id}: start {self.start_time} not before end {self.end_time}")
        if self.start_time < 0 or self.end_time > 24.0 + _FP_GUARD:
            raise BlockOutOfDay(f"block {self.id} [{self.start_time}, {self.end_time}] leaves the day")
        if self.distance_km < 0:
            raise ScenarioError(f"block {self.id}: negative distance")


def discretize_block(block: TripBlock, grid: TimeGrid) -> tuple[int, int]:
    """Round the start down and the end up to interval boundaries.

    Returns ``(t0, t1)`` with ``t0 = floor(start/dT) + 1`` and
    ``t1 = ceil(end/dT)``.
    """
    dT = grid.interval_hours
    t0 = int(math.floor(block.start_time / dT + _FP_GUARD)) + 1
    t1 = int(math.ceil(block.end_time / dT - _FP_GUARD))
    if t0 > t1:
        raise DegenerateBlock(f"block {block.id}: t0={t0} > t1={t1}")
    if t0 < 1 or t1 > grid.intervals_per_day:
        raise BlockOutOfDay(f"block {block.id}: intervals [{t0}, {t1}] outside 1..{grid.intervals_per_day}")
    if not 0 <= block.day < grid.num_days:
        raise BlockOutOfDay(f"block {block.id}: day {block.day} outside 0..{grid.num_days - 1}")
    return t0, t1


@dataclass
class TripMatrices:
    """Sparse A/U/V indicators: one ``(t0, t1)`` pair per block."""

    block_ids: list[str]
    days: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    intervals_per_day: int
    _pos: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._pos = {b: k for k, b in enumerate(self.block_ids)}

    def __len__(self) -> int:
        return len(self.block_ids)

    def index(self, block_id: str) -> int:
        return self._pos[block_id]

    def depart_index(self, k: int) -> int:
        """Index in 2..T_d+1 at which the departure enters the SOE dynamics."""
        t0 = int(self.t0[k])
        return self.intervals_per_day + 1 if t0 == 1 else t0

    def arrive_index(self, k: int) -> int:
        """Index in 2..T_d+1 at which the return enters the SOE dynamics."""
        return int(self.t1[k]) + 1

    def is_active(self, k: int, t: int) -> bool:
        return int(self.t0[k]) <= t <= int(self.t1[k])

    def active(self) -> np.ndarray:
        """Dense ``A[k, t-1]`` over t = 1..T_d."""
        T = self.intervals_per_day
        t = np.arange(1, T + 1)
        return ((t[None, :] >= self.t0[:, None]) & (t[None, :] <= self.t1[:, None])).astype(np.int8)

    def depart(self) -> np.ndarray:
        """Dense ``U[k, t-1]`` over t = 1..T_d+1, with U(T_d+1) = U(1)."""
        T = self.intervals_per_day
        U = np.zeros((len(self), T + 1), dtype=np.int8)
        U[np.arange(len(self)), self.t0 - 1] = 1
        U[:, T] = U[:, 0]
        return U

    def arrive(self) -> np.ndarray:
        """Dense ``V[k, t-1]`` over t = 1..T_d+1, with V(1) tied to V(T_d+1)."""
        T = self.intervals_per_day
        V = np.zeros((len(self), T + 1), dtype=np.int8)
        V[np.arange(len(self)), self.t1] = 1  # index t1+1 -> column t1
        V[:, 0] = V[:, T]
        return V

    def on_day(self, s: int) -> list[int]:
        return [k for k in range(len(self)) if int(self.days[k]) == s]

    def active_count(self, s: int) -> np.ndarray:
        """Number of blocks of day ``s`` en route at each interval."""
        ks = self.on_day(s)
        if not ks:
            return np.zeros(self.intervals_per_day, dtype=int)
        return self.active()[ks].sum(axis=0)


def build_trip_matrices(blocks: Sequence[TripBlock], grid: TimeGrid) -> TripMatrices:
    pairs = [discretize_block(b, grid) for b in blocks]
    ids = [b.id for b in blocks]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate block ids")
    t0 = np.array([p[0] for p in pairs], dtype=np.int64)
    t1 = np.array([p[1] for p in pairs], dtype=np.int64)
    days = np.array([b.day for b in blocks], dtype=np.int64)
    return TripMatrices(ids, days, t0, t1, grid.intervals_per_day)


# ------------------------------------------------------------------ ingestion
def parse_clock(text: str) -> float:
    """``"05:30"``, ``"0530"`` or ``"25:10"`` (GTFS past-midnight) to hours."""
    s = text.strip()
    if ":" in s:
        parts = s.split(":")
        h, m = int(parts[0]), int(parts[1])
        sec = int(parts[2]) if len(parts) > 2 else 0
    else:
        if not s.isdigit() or len(s) not in (3, 4):
            raise ScenarioError(f"cannot parse clock time {text!r}")
        h, m, sec = int(s[:-2]), int(s[-2:]), 0
    if m >= 60 or sec >= 60:
        raise ScenarioError(f"cannot parse clock time {text!r}")
    return h + m / 60.0 + sec / 3600.0


def block_from_clock(block_id: str, day: int, start: float, end: float, distance_km: float, grid: TimeGrid) -> TripBlock:
    """Shift clock times by the reference; a block crossing the day boundary is rejected."""
    x0 = grid.clock_to_offset(start)
    span = end - start
    if span <= 0:
        span = (end - start) % 24.0 or 24.0
    x1 = x0 + span
    if x1 > 24.0 + _FP_GUARD:
        raise BlockOutOfDay(
            f"block {block_id} runs past the day boundary at reference time {grid.reference_time:g} h"
        )
    return TripBlock(block_id, day, x0, min(x1, 24.0), distance_km)


BLOCK_COLUMNS = ("block_id", "day_index", "start_hhmm", "end_hhmm", "distance_km")


def load_blocks_csv(path: str | Path, grid: TimeGrid) -> list[TripBlock]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in BLOCK_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ScenarioError(f"{path}: missing columns {missing}")
        out = []
        for line, row in enumerate(reader, start=2):
            try:
                out.append(
                    block_from_clock(
                        row["block_id"].strip(),
                        int(row["day_index"]),
                        parse_clock(row["start_hhmm"]),
                        parse_clock(row["end_hhmm"]),
                        float(row["distance_km"]),
                        grid,
                    )
                )
            except (ScenarioError, ValueError) as exc:
                raise type(exc)(f"{path}:{line}: {exc}") from None
    return out


def write_blocks_csv(path: str | Path, blocks: Iterable[TripBlock], grid: TimeGrid) -> None:
    def clock(offset: float) -> str:
        total = int(round((grid.reference_time + offset) * 60))
        return f"{total // 60:02d}:{total % 60:02d}"

    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BLOCK_COLUMNS)
        for b in blocks:
            w.writerow([b.id, b.day, clock(b.start_time), clock(b.end_time), repr(b.distance_km)])
