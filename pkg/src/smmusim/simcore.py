"""Deterministic discrete-event engine.

Simulated time is an integer count of femtoseconds. Clock domains only
convert between cycles and time; there is one global event queue.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

FS_PER_NS = 1_000_000
FS_PER_SECOND = 10**15
MAX_TIME = 2**64 - 1


class SimulationError(RuntimeError):
    """Fatal configuration or arithmetic error inside the simulator."""


def ns(value: float) -> int:
    """Convert nanoseconds to integer femtoseconds (rounded)."""
    return int(round(value * FS_PER_NS))


def to_ns(fs: int) -> float:
    return fs / FS_PER_NS


def _check_time(t: int) -> int:
    if t < 0 or t > MAX_TIME:
        raise SimulationError(f"simulated time {t} fs outside the unsigned 64-bit range")
    return t


@dataclass(frozen=True)
class ClockDomain:
    name: str
    frequency_hz: int
    period_fs: int = field(init=False)

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise SimulationError(f"clock {self.name!r}: frequency must be positive")
        # round-half-up integer division keeps this exact for large frequencies
        period = (FS_PER_SECOND + self.frequency_hz // 2) // self.frequency_hz
        object.__setattr__(self, "period_fs", period)

    @classmethod
    def mhz(cls, mhz: float, name: Optional[str] = None) -> "ClockDomain":
        hz = int(round(mhz * 1_000_000))
        return cls(name or f"{mhz:g}MHz", hz)

    @property
    def frequency_mhz(self) -> float:
        return self.frequency_hz / 1_000_000

    def next_edge(self, t: int) -> int:
        """First clock edge at or after ``t`` (edges sit at multiples of the period)."""
        p = self.period_fs
        return -(-t // p) * p

    def cycles(self, n: int) -> int:
        return cycles_to_time(self, n)


def cycles_to_time(clock: ClockDomain, cycles: int) -> int:
    if cycles < 0:
        raise SimulationError("cycle count must be non-negative")
    return _check_time(cycles * clock.period_fs)


Action = Callable[[], None]


class Engine:
    """Single-threaded event loop ordered by ``(fire_time, sequence)``."""

    def __init__(self):
        self.now = 0
        self._queue: list[tuple[int, int, Action]] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self.finalized = False
        self.events_processed = 0

    def schedule(self, delay: int, action: Action) -> int:
        if self.finalized:
            raise SimulationError("engine already finalized")
        if delay < 0:
            raise SimulationError("negative delay")
        return self.schedule_at(self.now + delay, action)

    def schedule_at(self, when: int, action: Action) -> int:
        if self.finalized:
            raise SimulationError("engine already finalized")
        if when < self.now:
            raise SimulationError(f"cannot schedule in the past ({when} < {self.now})")
        _check_time(when)
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (when, seq, action))
        return seq

    def cancel(self, event_id: int) -> None:
        self._cancelled.add(event_id)

    def pending(self) -> int:
        return len(self._queue)

    def peek_time(self) -> Optional[int]:
        return self._queue[0][0] if self._queue else None

    def run_until(self, limit: Optional[int] = None, max_events: Optional[int] = None) -> int:
        """Process events with ``fire_time <= limit`` (or until idle when ``limit`` is None).

        ``max_events`` caps the number of processed events for this call. Returns
        the simulated time after the last processed event.
        """
        queue = self._queue
        cancelled = self._cancelled
        count = 0
        while queue:
            if max_events is not None and count >= max_events:
                break
            when, seq, action = queue[0]
            if limit is not None and when > limit:
                break
            heapq.heappop(queue)
            if seq in cancelled:
                cancelled.discard(seq)
                continue
            self.now = when
            action()
            count += 1
        self.events_processed += count
        return self.now

    def finalize(self) -> None:
        self.finalized = True
