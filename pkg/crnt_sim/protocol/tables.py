# crnt_sim/protocol/tables.py
# Neighbor table construction, PNT packing and the CRNT union.

from typing import Dict, Iterable

from ..core.errors import EmptyTable
from .codec import BASE_BEACON_BYTES, MAX_MESSAGE_BYTES, max_pnt_entries
from .models import Beacon, Crnt, NeighborEntry, NeighborTable, Pnt, Position

DEFAULT_PNT_LIFETIME_MS = 1000
DEFAULT_PNT_BUDGET = MAX_MESSAGE_BYTES - BASE_BEACON_BYTES


def build_nt(owner: int, owner_pos: Position, recent_beacons: Iterable[Beacon], now: int) -> NeighborTable:
    """
    Clear and rebuild the neighbor table from the last second of beacons.

    One row per sender from its freshest beacon, nearest first; equal
    distances fall back to ascending id.
    """
    freshest: Dict[int, Beacon] = {}
    for beacon in recent_beacons:
        if beacon.sender == owner:
            continue
        held = freshest.get(beacon.sender)
        if held is None or beacon.ts >= held.ts:
            freshest[beacon.sender] = beacon

    rows = sorted(
        (beacon.as_entry() for beacon in freshest.values()),
        key=lambda entry: (owner_pos.distance_to(entry.position), entry.id),
    )
    return NeighborTable(owner=owner, entries=tuple(rows), built_at=now)


def make_pnt(nt: NeighborTable, now: int, next_sn: int,
             lifetime_ms: int = DEFAULT_PNT_LIFETIME_MS,
             byte_budget: int = DEFAULT_PNT_BUDGET) -> Pnt:
    if len(nt) == 0:
        raise EmptyTable(f"vehicle {nt.owner} has no neighbors to piggyback")
    if lifetime_ms <= 0:
        raise ValueError(f"PNT lifetime must be positive, got {lifetime_ms}")

    keep = max_pnt_entries(byte_budget)
    # the wire has no per-entry age; stamp rows with the table time up front
    entries = tuple(entry.model_copy(update={"last_update": now}) for entry in nt.entries[:keep])
    return Pnt(ts=now, lt=now + lifetime_ms, sn=next_sn, entries=entries)


def merge_entry(crnt: Crnt, entry: NeighborEntry, reporter: int) -> bool:
    """
    Fold one row into the CRNT. Freshest last_update wins, a tie goes to the
    higher reporter id, rows about the owner are dropped. Returns True when
    the row was stored.
    """
    if entry.id == crnt.owner:
        return False
    held = crnt.entries.get(entry.id)
    if held is not None:
        if entry.last_update < held.last_update:
            return False
        if entry.last_update == held.last_update and reporter <= crnt.reporters.get(entry.id, -1):
            return False
    crnt.entries[entry.id] = entry
    crnt.reporters[entry.id] = reporter
    return True


def purge_stale(crnt: Crnt, now: int, horizon_ms: int = DEFAULT_PNT_LIFETIME_MS) -> Crnt:
    if horizon_ms <= 0:
        raise ValueError(f"staleness horizon must be positive, got {horizon_ms}")
    expired = [vehicle_id for vehicle_id, entry in crnt.entries.items()
               if now - entry.last_update > horizon_ms]
    for vehicle_id in expired:
        del crnt.entries[vehicle_id]
        crnt.reporters.pop(vehicle_id, None)
    crnt.last_refresh = now
    return crnt
