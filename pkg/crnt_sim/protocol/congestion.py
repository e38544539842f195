# crnt_sim/protocol/congestion.py
# Channel congestion estimate that gates neighbor-table piggybacking.

from collections import Counter
from typing import Iterable, Tuple

from ..core.errors import NoNeighbors
from .models import BEACONS_PER_SECOND, CongestionSample

CONGESTION_WINDOW_MS = 1000
DEFAULT_CP_THRESHOLD_PCT = 50.0


def compute_congestion(sample: CongestionSample) -> float:
    """
    Percentage of expected beacons that never arrived in the last second.

    CP = (1 - sum(B) / (N * 10)) * 100, computed on integers so that
    hand-checkable patterns come out exact.
    """
    if sample.n == 0:
        raise NoNeighbors("no neighbors heard in the last second")
    expected = sample.n * BEACONS_PER_SECOND
    missing = expected - sum(sample.per_neighbor_counts.values())
    return missing * 100 / expected


def should_build_nt(cp: float, threshold_pct: float = DEFAULT_CP_THRESHOLD_PCT) -> bool:
    if not 0.0 <= cp <= 100.0:
        raise ValueError(f"congestion percentage out of range: {cp}")
    return cp < threshold_pct


def sample_from_log(reception_log: Iterable[Tuple[int, int]], now_ms: int,
                    window_ms: int = CONGESTION_WINDOW_MS) -> CongestionSample:
    """
    Build a sample from (received_at_ms, sender) pairs.

    Only receptions in (now - window, now] count; a sender heard more than ten
    times (MAC jitter can fit an eleventh beacon in the window) is capped at ten.
    """
    counts = Counter(sender for received_at, sender in reception_log
                     if now_ms - window_ms < received_at <= now_ms)
    return CongestionSample(per_neighbor_counts={
        sender: min(count, BEACONS_PER_SECOND) for sender, count in sorted(counts.items())
    })
