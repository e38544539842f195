# crnt_sim/engine/events.py
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional

GLOBAL_SUBJECT = -1


class EventKind(str, Enum):
    BEACON_TIMER = "BeaconTimer"
    NT_TIMER = "NtTimer"
    TX_START = "TxStart"
    TX_END = "TxEnd"
    MOBILITY_STEP = "MobilityStep"
    METRICS_TICK = "MetricsTick"


@dataclass(order=True)
class Event:
    time_us: int
    seq: int
    kind: EventKind = field(compare=False)
    subject: int = field(default=GLOBAL_SUBJECT, compare=False)
    payload: Any = field(default=None, compare=False, repr=False)


class EventQueue:
    """Min-heap of events ordered by (time_us, seq); seq is the insertion counter."""

    def __init__(self):
        self._heap: List[Event] = []
        self._seq = 0

    def push(self, time_us: int, kind: EventKind, subject: int = GLOBAL_SUBJECT, payload: Any = None) -> Event:
        if time_us < 0:
            raise ValueError(f"event time must be non-negative, got {time_us}")
        event = Event(int(time_us), self._seq, kind, subject, payload)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def peek_time(self) -> Optional[int]:
        return self._heap[0].time_us if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)
