# crnt_sim/protocol/codec.py
# Beacon wire codec. docs/wire-format.md is the byte-level contract.

import struct

from pydantic import ValidationError

from ..core.errors import BeaconTooLarge, MalformedBeacon
from .models import Beacon, Heading, NeighborEntry, Pnt, Position

MAGIC = 0xCB
VERSION = 1
FLAG_PNT = 0x01
MAX_MESSAGE_BYTES = 512

# magic, version, flags, length, sender, ts, interval, x_cm, y_cm, speed_cms, heading_cdeg
HEADER = struct.Struct("!BBBHIQHiiHH")
# ts, lt, sn, entry count
PNT_HEADER = struct.Struct("!QQHB")
# id, x_cm, y_cm, speed_cms, heading_cdeg
ENTRY = struct.Struct("!IiiHH")

BASE_BEACON_BYTES = HEADER.size
MAX_PNT_ENTRIES = 255


def pnt_section_bytes(entry_count: int) -> int:
    return PNT_HEADER.size + ENTRY.size * entry_count


def max_pnt_entries(byte_budget: int) -> int:
    """Largest entry count whose PNT section fits in byte_budget (may be 0)."""
    if byte_budget < PNT_HEADER.size:
        return 0
    return min((byte_budget - PNT_HEADER.size) // ENTRY.size, MAX_PNT_ENTRIES)


def encoded_size(beacon: Beacon) -> int:
    if beacon.pnt is None:
        return BASE_BEACON_BYTES
    return BASE_BEACON_BYTES + pnt_section_bytes(len(beacon.pnt.entries))


def _centi(value: float) -> int:
    return int(round(value * 100))


def _centi_heading(heading: Heading) -> int:
    return _centi(heading.degrees) % 36000


def encode_beacon(beacon: Beacon) -> bytes:
    size = encoded_size(beacon)
    if size > MAX_MESSAGE_BYTES:
        raise BeaconTooLarge(f"beacon from {beacon.sender} encodes to {size} bytes (cap {MAX_MESSAGE_BYTES})")

    flags = FLAG_PNT if beacon.pnt is not None else 0
    try:
        parts = [HEADER.pack(
            MAGIC, VERSION, flags, size,
            beacon.sender, beacon.ts, beacon.interval,
            _centi(beacon.position.x), _centi(beacon.position.y),
            _centi(beacon.speed), _centi_heading(beacon.heading),
        )]
        if beacon.pnt is not None:
            pnt = beacon.pnt
            parts.append(PNT_HEADER.pack(pnt.ts, pnt.lt, pnt.sn, len(pnt.entries)))
            for entry in pnt.entries:
                parts.append(ENTRY.pack(
                    entry.id, _centi(entry.position.x), _centi(entry.position.y),
                    _centi(entry.speed), _centi_heading(entry.heading),
                ))
    except struct.error as e:
        raise ValueError(f"beacon from {beacon.sender} has a field outside the wire range: {e}") from e
    return b"".join(parts)


def has_pnt(data: bytes) -> bool:
    """Header-only test of the PNT flag; no other validation."""
    return len(data) >= 3 and data[0] == MAGIC and bool(data[2] & FLAG_PNT)


def decode_beacon(data: bytes) -> Beacon:
    """Decode one frame. Any inconsistency raises MalformedBeacon, never anything else."""
    data = bytes(data)
    if len(data) < HEADER.size:
        raise MalformedBeacon("truncated", f"{len(data)} bytes")

    (magic, version, flags, length, sender, ts, interval,
     x_cm, y_cm, speed_cms, heading_cd) = HEADER.unpack_from(data, 0)

    if magic != MAGIC:
        raise MalformedBeacon("bad_magic", f"0x{magic:02x}")
    if version != VERSION:
        raise MalformedBeacon("bad_version", str(version))
    if flags & ~FLAG_PNT:
        raise MalformedBeacon("reserved_flags", f"0x{flags:02x}")
    if length != len(data):
        raise MalformedBeacon("length_mismatch", f"header says {length}, frame has {len(data)}")
    if length > MAX_MESSAGE_BYTES:
        raise MalformedBeacon("oversize", str(length))
    if interval == 0:
        raise MalformedBeacon("bad_interval")
    if heading_cd >= 36000:
        raise MalformedBeacon("bad_heading", str(heading_cd))

    pnt = None
    if flags & FLAG_PNT:
        pnt = _decode_pnt(data, sender)
    elif length != HEADER.size:
        raise MalformedBeacon("length_mismatch", "trailing bytes after a plain beacon")

    try:
        return Beacon(
            sender=sender,
            ts=ts,
            interval=interval,
            position=Position(x=x_cm / 100, y=y_cm / 100),
            speed=speed_cms / 100,
            heading=Heading(degrees=heading_cd / 100),
            pnt=pnt,
        )
    except ValidationError as e:
        raise MalformedBeacon("invalid_field", str(e.errors()[0]["loc"])) from e


def _decode_pnt(data: bytes, sender: int) -> Pnt:
    offset = HEADER.size
    if len(data) < offset + PNT_HEADER.size:
        raise MalformedBeacon("truncated", "PNT header cut short")
    ts, lt, sn, count = PNT_HEADER.unpack_from(data, offset)
    offset += PNT_HEADER.size
    if offset + count * ENTRY.size != len(data):
        raise MalformedBeacon("entry_count_mismatch", f"{count} entries in {len(data)} bytes")
    if lt <= ts:
        raise MalformedBeacon("bad_lifetime", f"lt {lt} <= ts {ts}")

    entries = []
    seen = set()
    for _ in range(count):
        vehicle_id, x_cm, y_cm, speed_cms, heading_cd = ENTRY.unpack_from(data, offset)
        offset += ENTRY.size
        if heading_cd >= 36000:
            raise MalformedBeacon("bad_heading", f"entry {vehicle_id}")
        if vehicle_id == sender or vehicle_id in seen:
            raise MalformedBeacon("duplicate_entry", str(vehicle_id))
        seen.add(vehicle_id)
        entries.append((vehicle_id, x_cm, y_cm, speed_cms, heading_cd))
    try:
        # no per-entry age on the wire: rows inherit the table timestamp
        rows = tuple(
            NeighborEntry(
                id=vehicle_id,
                position=Position(x=x_cm / 100, y=y_cm / 100),
                speed=speed_cms / 100,
                heading=Heading(degrees=heading_cd / 100),
                last_update=ts,
            )
            for vehicle_id, x_cm, y_cm, speed_cms, heading_cd in entries
        )
        return Pnt(ts=ts, lt=lt, sn=sn, entries=rows)
    except ValidationError as e:
        raise MalformedBeacon("invalid_field", str(e.errors()[0]["loc"])) from e
