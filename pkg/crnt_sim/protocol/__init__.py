from .codec import decode_beacon, encode_beacon, has_pnt
from .congestion import compute_congestion, sample_from_log, should_build_nt
from .models import (
    Beacon,
    CongestionSample,
    Crnt,
    Heading,
    NeighborEntry,
    NeighborTable,
    Pnt,
    PntVerdict,
    Position,
    SequenceCheck,
    SequenceList,
)
from .receive import accept_pnt, check_sequence, should_inspect
from .tables import build_nt, make_pnt, merge_entry, purge_stale

__all__ = [
    "Beacon", "CongestionSample", "Crnt", "Heading", "NeighborEntry", "NeighborTable",
    "Pnt", "PntVerdict", "Position", "SequenceCheck", "SequenceList",
    "accept_pnt", "build_nt", "check_sequence", "compute_congestion", "decode_beacon",
    "encode_beacon", "has_pnt", "make_pnt", "merge_entry", "purge_stale",
    "sample_from_log", "should_build_nt", "should_inspect",
]
