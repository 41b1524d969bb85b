"""Deterministic discrete-event loop.

Events are processed in (time_us, seq) order; seq is assigned at emission so
simultaneous events break ties deterministically. A handler exception aborts
the scenario with a diagnostic rather than being swallowed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Sequence


@dataclass(frozen=True)
class Event:
    time_us: float
    seq: int
    dst: str
    payload: dict = field(default_factory=dict)


class ScenarioAbort(RuntimeError):
    """A node handler raised while processing an event."""


class EventContext:
    """Handed to handlers: the current clock plus an emit() scheduler."""

    def __init__(self, loop: "_Loop"):
        self._loop = loop

    @property
    def now(self) -> float:
        return self._loop.now

    def emit(self, dst: str, payload: dict, delay_us: float = 0.0) -> Event:
        if delay_us < 0:
            raise ValueError("delay must be non-negative")
        ev = Event(time_us=self._loop.now + delay_us, seq=self._loop.next_seq(),
                   dst=dst, payload=payload)
        self._loop.push(ev)
        return ev


class _Loop:
    def __init__(self):
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = 0
        self.now = 0.0

    def next_seq(self) -> int:
        s = self._seq
        self._seq += 1
        return s

    def push(self, ev: Event):
        heapq.heappush(self._heap, (ev.time_us, ev.seq, ev))

    def pop(self) -> Event:
        _, _, ev = heapq.heappop(self._heap)
        self.now = ev.time_us
        return ev

    def __bool__(self) -> bool:
        return bool(self._heap)


def run_event_loop(initial_events: Sequence[Event],
                   handlers: dict[str, Callable[[Event, EventContext], None]],
                   max_events: int = 1_000_000) -> list[Event]:
    """Process events until the queue drains; returns the ordered trace."""
    loop = _Loop()
    ctx = EventContext(loop)
    for ev in initial_events:
        if ev.time_us < 0:
            raise ValueError("event times must be non-negative")
        loop._seq = max(loop._seq, ev.seq + 1)
        loop.push(ev)
    trace: list[Event] = []
    while loop:
        if len(trace) >= max_events:
            raise ScenarioAbort(f"event budget exceeded ({max_events})")
        ev = loop.pop()
        trace.append(ev)
        handler = handlers.get(ev.dst)
        if handler is None:
            raise ScenarioAbort(f"no handler registered for node {ev.dst!r}")
        try:
            handler(ev, ctx)
        except ScenarioAbort:
            raise
        except Exception as exc:
            raise ScenarioAbort(
                f"handler for {ev.dst!r} failed at t={ev.time_us}: {exc}") from exc
    return trace


def sink(_event: Event, _ctx: EventContext) -> None:
    """No-op handler for audit/bookkeeping nodes."""
