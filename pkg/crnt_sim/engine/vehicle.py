# crnt_sim/engine/vehicle.py
# Per-vehicle protocol state driven by the event loop.

from collections import deque
from enum import Enum
from typing import Deque, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from ..core.config import RunConfig
from ..core.errors import NoNeighbors
from ..core.logger import setup_logger
from ..protocol.congestion import CONGESTION_WINDOW_MS, compute_congestion, sample_from_log, should_build_nt
from ..protocol.models import Beacon, Crnt, NeighborTable, Pnt, PntVerdict, Position, SequenceList
from ..protocol.receive import accept_pnt, should_inspect
from ..protocol.tables import build_nt, make_pnt, merge_entry, purge_stale

logger = setup_logger(__name__)


class NtDecision(str, Enum):
    ARMED = "Armed"
    CONGESTED = "Congested"
    SPARSE = "Sparse"


class NtTick(BaseModel):
    model_config = ConfigDict(frozen=True)

    time_ms: int
    vehicle: int
    decision: NtDecision
    cp_pct: Optional[float] = None
    entries: int = 0


class VehicleAgent:
    """
    Everything one vehicle knows: its reception log, last second of beacons,
    CRNT, sequence list, inspection throttle and the PNT armed for its next
    beacon. Positions live in the mobility state, not here.
    """

    def __init__(self, vehicle_id: int, config: RunConfig):
        self.id = vehicle_id
        self.config = config
        self.reception_log: Deque[Tuple[int, int]] = deque()
        self.recent_beacons: Deque[Beacon] = deque()
        self.crnt = Crnt(owner=vehicle_id)
        self.sl = SequenceList()
        self.last_pnt_inspect: Dict[int, int] = {}
        self.next_sn = 0
        self.pending_pnt: Optional[Pnt] = None
        self.last_cp: Optional[float] = None

    def receive(self, beacon: Beacon, now_ms: int) -> Optional[PntVerdict]:
        """
        Handle one delivered beacon. The sender's own row always refreshes the
        direct view; the PNT is looked at only when the per-peer throttle
        allows. Returns the PNT verdict, or None when inspection was skipped.
        """
        if beacon.sender == self.id:
            return None
        self.reception_log.append((now_ms, beacon.sender))
        self.recent_beacons.append(beacon)
        merge_entry(self.crnt, beacon.as_entry(), reporter=beacon.sender)

        if beacon.pnt is None:
            return PntVerdict.NO_PNT
        if not should_inspect(beacon.sender, now_ms, self.last_pnt_inspect, self.config.inspect_throttle_ms):
            return None
        self.last_pnt_inspect[beacon.sender] = now_ms
        return accept_pnt(self.crnt, self.sl, beacon, now_ms)

    def prune(self, now_ms: int):
        horizon = self.config.pnt_lifetime_ms
        while self.reception_log and self.reception_log[0][0] <= now_ms - CONGESTION_WINDOW_MS:
            self.reception_log.popleft()
        # beacons can arrive out of generation order under MAC deferral
        self.recent_beacons = deque(b for b in self.recent_beacons if now_ms - b.ts <= horizon)

    def direct_nt(self, position: Position, now_ms: int) -> NeighborTable:
        self.prune(now_ms)
        return build_nt(self.id, position, self.recent_beacons, now_ms)

    def refresh(self, now_ms: int) -> Crnt:
        return purge_stale(self.crnt, now_ms, self.config.pnt_lifetime_ms)

    def take_pending_pnt(self) -> Optional[Pnt]:
        pnt, self.pending_pnt = self.pending_pnt, None
        return pnt


def vehicle_tick_nt(agent: VehicleAgent, position: Position, now_ms: int, byte_budget: int) -> NtTick:
    """
    NT timer: measure congestion over the last second, and below the
    threshold build the table and arm it for the next beacon.
    """
    agent.prune(now_ms)
    sample = sample_from_log(agent.reception_log, now_ms)
    try:
        cp = compute_congestion(sample)
    except NoNeighbors:
        agent.last_cp = None
        return NtTick(time_ms=now_ms, vehicle=agent.id, decision=NtDecision.SPARSE)

    agent.last_cp = cp
    if not should_build_nt(cp, agent.config.cp_threshold_pct):
        return NtTick(time_ms=now_ms, vehicle=agent.id, decision=NtDecision.CONGESTED, cp_pct=cp)

    nt = build_nt(agent.id, position, agent.recent_beacons, now_ms)
    if len(nt) == 0:
        return NtTick(time_ms=now_ms, vehicle=agent.id, decision=NtDecision.SPARSE, cp_pct=cp)

    agent.pending_pnt = make_pnt(nt, now_ms, agent.next_sn, agent.config.pnt_lifetime_ms, byte_budget)
    agent.next_sn = (agent.next_sn + 1) & 0xFFFF
    return NtTick(time_ms=now_ms, vehicle=agent.id, decision=NtDecision.ARMED, cp_pct=cp,
                  entries=len(agent.pending_pnt.entries))
