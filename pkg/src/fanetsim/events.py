"""Event queue with an integer microsecond clock."""
from __future__ import annotations

import enum
import hashlib
import heapq
import struct
from dataclasses import dataclass, field
from typing import Any

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S


class EventKind(enum.IntEnum):
    PACKET_ARRIVAL = 0
    TIMER_FIRE = 1
    WAYPOINT_REACHED = 2
    HELLO_DUE = 3
    TC_DUE = 4
    APP_SEND = 5
    SIM_END = 6


@dataclass(frozen=True)
class Event:
    time: int  # microseconds
    sequence: int
    kind: EventKind
    payload: Any = field(default=None, compare=False)


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class EventQueue:
    """Dispatches events in (time, sequence) order and keeps a trace hash."""

    def __init__(self):
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.now = 0
        self.dispatched = 0
        self._trace = hashlib.blake2b(digest_size=16)
        self._pack = struct.Struct("<qqB").pack

    def __len__(self):
        return len(self._heap)

    def schedule(self, time: int, kind: EventKind, payload: Any = None) -> Event:
        if time < self.now:
            raise SchedulingError(f"event at {time}us scheduled while clock is {self.now}us")
        ev = Event(time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, (time, ev.sequence, ev))
        return ev

    def push(self, event: Event) -> None:
        """Insert a pre-built event; its sequence number must be unique."""
        if event.time < self.now:
            raise SchedulingError(f"event at {event.time}us scheduled while clock is {self.now}us")
        self._seq = max(self._seq, event.sequence + 1)
        heapq.heappush(self._heap, (event.time, event.sequence, event))

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event:
        time, seq, ev = heapq.heappop(self._heap)
        self.now = time
        self.dispatched += 1
        self._trace.update(self._pack(time, seq, int(ev.kind)))
        return ev

    def trace_hash(self) -> str:
        return self._trace.hexdigest()


def schedule(queue: EventQueue, event: Event) -> None:
    queue.push(event)
