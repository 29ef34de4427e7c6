"""Virtual time and deterministic event scheduling.

All platform components take time from a shared :class:`VirtualClock`.
Time is kept as integer microseconds so that interval arithmetic (status
ledgers, availability fractions) is exact and scenario replays are
bit-reproducible.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable

SECOND = 1_000_000
MINUTE = 60 * SECOND
HOUR = 60 * MINUTE
DAY = 24 * HOUR


def seconds(t: float) -> int:
    """Convert seconds to integer virtual microseconds."""
    return round(t * SECOND)


def as_seconds(t: int) -> float:
    return t / SECOND


class VirtualClock:
    """Monotone virtual clock, microsecond resolution."""

    def __init__(self, start: int = 0):
        self._now = int(start)

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> None:
        if t < self._now:
            raise ValueError(f"clock cannot move backwards ({t} < {self._now})")
        self._now = t


@dataclass(order=True)
class _Event:
    time: int
    seq: int
    fn: Callable[[], None] = field(compare=False)
    cancelled: bool = field(default=False, compare=False)


class EventHandle:
    """Cancellation token for a scheduled event."""

    def __init__(self, event: _Event):
        self._event = event

    def cancel(self) -> None:
        self._event.cancelled = True

    @property
    def time(self) -> int:
        return self._event.time


class Scheduler:
    """Single-threaded discrete-event scheduler.

    Events fire in (time, insertion order); callbacks may schedule further
    events. Determinism holds as long as callbacks use seeded generators.
    """

    def __init__(self, clock: VirtualClock | None = None):
        self.clock = clock or VirtualClock()
        self._heap: list[_Event] = []
        self._seq = 0

    def at(self, t: int, fn: Callable[[], None]) -> EventHandle:
        if t < self.clock.now:
            raise ValueError("cannot schedule in the past")
        ev = _Event(int(t), self._seq, fn)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return EventHandle(ev)

    def after(self, dt: int, fn: Callable[[], None]) -> EventHandle:
        return self.at(self.clock.now + int(dt), fn)

    def every(self, period: int, fn: Callable[[], None], start: int | None = None) -> None:
        """Schedule ``fn`` periodically, first run at ``start`` (default: now)."""
        first = self.clock.now if start is None else start

        def tick(t=first):
            fn()
            self.at(t + period, lambda: tick(t + period))

        self.at(first, lambda: tick(first))

    def pending(self) -> int:
        return sum(1 for e in self._heap if not e.cancelled)

    def run_until(self, t_end: int) -> None:
        """Run all events with time <= t_end, then set the clock to t_end."""
        while self._heap and self._heap[0].time <= t_end:
            ev = heapq.heappop(self._heap)
            if ev.cancelled:
                continue
            self.clock.advance_to(ev.time)
            ev.fn()
        self.clock.advance_to(t_end)

    def step(self) -> bool:
        """Run the single next event. Returns False when nothing is pending."""
        while self._heap:
            ev = heapq.heappop(self._heap)
            if ev.cancelled:
                continue
            self.clock.advance_to(ev.time)
            ev.fn()
            return True
        return False
