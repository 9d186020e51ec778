"""Integer-picosecond time and the deterministic event queue."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

PS_PER_S = 10**12


def to_ps(seconds: float) -> int:
    """Round a time in seconds to whole picoseconds."""
    if seconds < 0 or not math.isfinite(seconds):
        raise ValueError(f"time must be finite and non-negative, got {seconds!r}")
    return round(seconds * PS_PER_S)


def to_seconds(ps: int) -> float:
    return ps / PS_PER_S


def serialization_ps(nbytes: int, bandwidth: int) -> int:
    """Exact ceiling of ``nbytes / bandwidth`` in picoseconds."""
    return -(-nbytes * PS_PER_S // bandwidth)


class EventKind(Enum):
    COMMAND_ISSUED = "CommandIssued"
    SEGMENT_TX = "SegmentTx"
    SEGMENT_RX = "SegmentRx"
    ACK_RX = "AckRx"
    COPY_DONE = "CopyDone"
    STREAM_DELIVERED = "StreamDelivered"
    KERNEL_WAKE = "KernelWake"


@dataclass(order=True)
class Event:
    time: int
    sequence: int
    node: int = field(compare=False)
    kind: EventKind = field(compare=False)
    data: Any = field(default=None, compare=False)


class SchedulingError(RuntimeError):
    """An event was scheduled before the current simulation time."""


class EventQueue:
    """Min-heap of events ordered by (time, sequence).

    The sequence number is taken from a global counter at schedule time, so
    simultaneous events run in the order they were scheduled.
    """

    def __init__(self) -> None:
        self._heap: list[Event] = []
        self._next_seq = 0
        self.now = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: int, node: int, kind: EventKind, data: Any = None) -> Event:
        if time < self.now:
            raise SchedulingError(
                f"event {kind.value} at t={time}ps is before now={self.now}ps"
            )
        event = Event(time, self._next_seq, node, kind, data)
        self._next_seq += 1
        heapq.heappush(self._heap, event)
        return event

    def peek_time(self) -> int | None:
        return self._heap[0].time if self._heap else None

    def pop(self) -> Event:
        event = heapq.heappop(self._heap)
        if event.time < self.now:
            raise SchedulingError("event queue went backwards in time")
        self.now = event.time
        return event
