# crnt_sim/protocol/models.py
# Protocol domain types: what a beacon says, what a vehicle remembers.

import math
from enum import Enum
from functools import cached_property
from typing import Annotated, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, FiniteFloat, computed_field, model_validator

VehicleId = Annotated[int, Field(ge=0, le=2**32 - 1)]
SeqNum = Annotated[int, Field(ge=0, le=2**16 - 1)]
Millis = Annotated[int, Field(ge=0)]

COMPASS_LABELS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")
BEACONS_PER_SECOND = 10


class Position(BaseModel):
    """Planar scenario coordinates in meters (x east, y north)."""
    model_config = ConfigDict(frozen=True)

    x: FiniteFloat
    y: FiniteFloat

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


class Heading(BaseModel):
    """Degrees clockwise from north, in [0, 360)."""
    model_config = ConfigDict(frozen=True)

    degrees: float = Field(ge=0.0, lt=360.0)

    @property
    def compass8(self) -> str:
        # 45 degree sectors centred on each label
        return COMPASS_LABELS[int(((self.degrees + 22.5) % 360.0) // 45.0)]

    @classmethod
    def normalized(cls, degrees: float) -> "Heading":
        value = degrees % 360.0
        if value >= 360.0:
            value = 0.0
        return cls(degrees=value)

    @classmethod
    def from_vector(cls, dx: float, dy: float) -> "Heading":
        return cls.normalized(math.degrees(math.atan2(dx, dy)))


class NeighborEntry(BaseModel):
    """One vehicle's last-known state."""
    model_config = ConfigDict(frozen=True)

    id: VehicleId
    position: Position
    speed: float = Field(ge=0.0, allow_inf_nan=False)
    heading: Heading
    last_update: Millis


class NeighborTable(BaseModel):
    """Direct neighbors built from one second of beacons, nearest first."""
    model_config = ConfigDict(frozen=True)

    owner: VehicleId
    entries: Tuple[NeighborEntry, ...] = ()
    built_at: Millis

    @model_validator(mode="after")
    def _one_row_per_vehicle(self):
        ids = [entry.id for entry in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("neighbor table holds duplicate vehicle ids")
        if self.owner in ids:
            raise ValueError("owner cannot appear in its own neighbor table")
        return self

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> List[int]:
        return [entry.id for entry in self.entries]


class Pnt(BaseModel):
    """Piggybacked neighbor table: the wire form of an NT."""
    model_config = ConfigDict(frozen=True)

    ts: Millis
    lt: Millis
    sn: SeqNum
    entries: Tuple[NeighborEntry, ...] = ()

    @model_validator(mode="after")
    def _lifetime_after_timestamp(self):
        if self.lt <= self.ts:
            raise ValueError(f"PNT lifetime {self.lt} must be after its timestamp {self.ts}")
        return self

    @model_validator(mode="after")
    def _unique_ids(self):
        ids = [entry.id for entry in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("PNT lists a vehicle more than once")
        return self


class Beacon(BaseModel):
    """Periodic safety message, optionally carrying a PNT."""
    model_config = ConfigDict(frozen=True)

    sender: VehicleId
    ts: Millis
    interval: int = Field(default=100, gt=0, le=2**16 - 1)
    position: Position
    speed: float = Field(ge=0.0, allow_inf_nan=False)
    heading: Heading
    pnt: Optional[Pnt] = None

    @model_validator(mode="after")
    def _sender_not_in_pnt(self):
        if self.pnt is not None and self.sender in (entry.id for entry in self.pnt.entries):
            raise ValueError(f"PNT of vehicle {self.sender} lists the sender itself")
        return self

    @property
    def has_pnt(self) -> bool:
        return self.pnt is not None

    def as_entry(self) -> NeighborEntry:
        """The sender's own row, as a receiver would store it."""
        return self.sender_entry

    @cached_property
    def sender_entry(self) -> NeighborEntry:
        return NeighborEntry(
            id=self.sender,
            position=self.position,
            speed=self.speed,
            heading=self.heading,
            last_update=self.ts,
        )


class SequenceRow(BaseModel):
    peer: VehicleId
    sn: SeqNum
    received_at: Millis


class SequenceList(BaseModel):
    """Per-receiver dedup state; most recently confirmed peer first."""

    rows: List[SequenceRow] = Field(default_factory=list)

    def find(self, peer: int) -> Optional[SequenceRow]:
        for row in self.rows:
            if row.peer == peer:
                return row
        return None

    def touch(self, peer: int):
        """Move a peer's row to the top without changing it."""
        for index, row in enumerate(self.rows):
            if row.peer == peer:
                if index:
                    self.rows.insert(0, self.rows.pop(index))
                return

    def record(self, peer: int, sn: int, received_at: int):
        existing = self.find(peer)
        if existing is not None:
            if received_at < existing.received_at:
                raise ValueError(f"receive time for peer {peer} went backwards")
            self.rows.remove(existing)
        self.rows.insert(0, SequenceRow(peer=peer, sn=sn, received_at=received_at))

    def __len__(self) -> int:
        return len(self.rows)


class Crnt(BaseModel):
    """Union of the owner's direct view with accepted PNTs."""

    owner: VehicleId
    entries: Dict[int, NeighborEntry] = Field(default_factory=dict)
    # entry id -> id of the vehicle that reported it (itself for direct beacons)
    reporters: Dict[int, int] = Field(default_factory=dict)
    last_refresh: Millis = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, vehicle_id: int) -> bool:
        return vehicle_id in self.entries


class CongestionSample(BaseModel):
    """Beacons received per neighbor over the last 1000 ms."""
    model_config = ConfigDict(frozen=True)

    per_neighbor_counts: Dict[VehicleId, Annotated[int, Field(ge=0, le=BEACONS_PER_SECOND)]]

    @computed_field
    @property
    def n(self) -> int:
        return len(self.per_neighbor_counts)


class SequenceCheck(str, Enum):
    FRESH = "fresh"
    STALE = "stale"


class PntVerdict(str, Enum):
    MERGED = "merged"
    REJECTED_STALE_SN = "rejected_stale_sn"
    REJECTED_EXPIRED = "rejected_expired"
    NO_PNT = "no_pnt"
