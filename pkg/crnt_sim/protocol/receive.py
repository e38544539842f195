# crnt_sim/protocol/receive.py
# Receive path for piggybacked tables: throttle, dedup, expiry, union.

from typing import Mapping

from ..core.logger import setup_logger
from .models import Beacon, Crnt, PntVerdict, SequenceCheck, SequenceList
from .tables import merge_entry

logger = setup_logger(__name__)

DEFAULT_INSPECT_THROTTLE_MS = 99


def is_newer(sn: int, stored: int, bits: int = 16) -> bool:
    """Serial-number comparison: newer iff 0 < (sn - stored) mod 2^bits < 2^(bits-1)."""
    modulus = 1 << bits
    delta = (sn - stored) % modulus
    return 0 < delta < modulus >> 1


def check_sequence(sl: SequenceList, peer: int, sn: int, bits: int = 16) -> SequenceCheck:
    row = sl.find(peer)
    if row is None or is_newer(sn, row.sn, bits):
        return SequenceCheck.FRESH
    return SequenceCheck.STALE


def accept_pnt(crnt: Crnt, sl: SequenceList, beacon: Beacon, now: int) -> PntVerdict:
    """
    Run one decoded beacon through the PNT receive checks.

    A stale sequence number only moves the peer's row to the top of the
    list; an expired table is rejected without touching the list.
    """
    if beacon.pnt is None:
        return PntVerdict.NO_PNT

    pnt = beacon.pnt
    if check_sequence(sl, beacon.sender, pnt.sn) is SequenceCheck.STALE:
        sl.touch(beacon.sender)
        return PntVerdict.REJECTED_STALE_SN
    if now > pnt.lt:
        return PntVerdict.REJECTED_EXPIRED

    merged = sum(merge_entry(crnt, entry, reporter=beacon.sender) for entry in pnt.entries)
    sl.record(beacon.sender, pnt.sn, now)
    logger.debug(f"vehicle {crnt.owner} merged {merged}/{len(pnt.entries)} rows from {beacon.sender} sn={pnt.sn}")
    return PntVerdict.MERGED


def should_inspect(peer: int, now: int, last_pnt_inspect: Mapping[int, int],
                   throttle_ms: int = DEFAULT_INSPECT_THROTTLE_MS) -> bool:
    last = last_pnt_inspect.get(peer)
    return last is None or now - last >= throttle_ms
