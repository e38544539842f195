# crnt_sim/metrics/collector.py
# Per-second, per-vehicle visibility and network-wide channel counters.

import math
from collections import Counter, defaultdict
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..core.logger import setup_logger
from ..protocol.models import Crnt, NeighborEntry, NeighborTable, Position

logger = setup_logger(__name__)

VEHICLE_COLUMNS = [
    "second", "vehicle", "x", "y", "speed_mps",
    "direct_m", "crnt_m", "direct_count", "crnt_count",
    "frames_sent", "pnt_sent", "cp_pct",
]

SECOND_COLUMNS = [
    "second", "vehicles",
    "direct_m_mean", "direct_m_max", "direct_m_min",
    "crnt_m_mean", "crnt_m_max", "crnt_m_min",
    "direct_count_mean", "direct_count_max", "direct_count_min",
    "crnt_count_mean", "crnt_count_max", "crnt_count_min",
    "frames_sent", "pnt_sent", "collisions", "delivered", "injected", "malformed", "mean_delay_us",
    "observer_direct_m", "observer_crnt_m", "observer_direct_count", "observer_crnt_count",
]

FRAME_COLUMNS = ["second", "sender", "start_us", "end_us", "delay_us", "airtime_us", "bytes", "has_pnt", "delivered"]


class Visibility(BaseModel):
    model_config = ConfigDict(frozen=True)

    direct_m: float = Field(ge=0.0)
    crnt_m: float = Field(ge=0.0)


class CarsSensed(BaseModel):
    model_config = ConfigDict(frozen=True)

    direct_count: int = Field(ge=0)
    crnt_count: int = Field(ge=0)


def crnt_view(nt: NeighborTable, crnt: Crnt) -> Dict[int, NeighborEntry]:
    """CRNT = NT u PNT; for a vehicle heard directly the direct row is shown."""
    view = {vehicle_id: entry for vehicle_id, entry in crnt.entries.items() if vehicle_id != crnt.owner}
    view.update({entry.id: entry for entry in nt.entries})
    return view


def _farthest(position: Position, entries) -> float:
    return max((position.distance_to(entry.position) for entry in entries), default=0.0)


def visibility(position: Position, nt: NeighborTable, crnt: Crnt) -> Visibility:
    """Farthest known vehicle through the direct NT and through the CRNT (0 when empty)."""
    return Visibility(
        direct_m=_farthest(position, nt.entries),
        crnt_m=_farthest(position, crnt_view(nt, crnt).values()),
    )


def cars_sensed(nt: NeighborTable, crnt: Crnt) -> CarsSensed:
    return CarsSensed(direct_count=len(nt), crnt_count=len(crnt_view(nt, crnt)))


class MetricsReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scenario: str
    mode: str
    seed: int
    observer_id: Optional[int] = None
    metadata: Dict[str, str] = Field(default_factory=dict)
    vehicles: pd.DataFrame
    seconds: pd.DataFrame
    frames: pd.DataFrame
    tx_counts: Dict[int, int] = Field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return self.vehicles.empty and self.seconds.empty

    @property
    def total_collisions(self) -> int:
        return int(self.seconds["collisions"].sum()) if not self.seconds.empty else 0

    @property
    def mean_delay_us(self) -> float:
        delivered = self.frames[self.frames["delivered"] > 0] if not self.frames.empty else self.frames
        return float(delivered["delay_us"].mean()) if len(delivered) else math.nan


class MetricsCollector:
    """
    Passive sink fed by the engine. Channel events are bucketed into the
    whole second that closes at or after them: (k-1, k] s belongs to k.
    """

    def __init__(self, duration_s: float, observer_id: Optional[int] = None):
        self.n_seconds = int(math.floor(duration_s + 1e-9))
        self.observer_id = observer_id
        self.vehicle_rows: List[dict] = []
        self.frame_rows: List[dict] = []
        self.counters: Dict[int, Counter] = defaultdict(Counter)
        self.frames_this_second: Counter = Counter()
        self.pnts_this_second: Counter = Counter()
        self.tx_counts: Counter = Counter()

    def second_of(self, time_us: int) -> int:
        second = max(1, math.ceil(time_us / 1_000_000))
        return min(second, self.n_seconds) if self.n_seconds else second

    def record_transmission(self, sender: int, has_pnt: bool):
        self.tx_counts[sender] += 1
        self.frames_this_second[sender] += 1
        if has_pnt:
            self.pnts_this_second[sender] += 1

    def record_frame(self, sender: int, start_us: int, end_us: int, generated_us: int, size: int,
                     has_pnt: bool, delivered: int, collisions: int, injected: int):
        second = self.second_of(end_us)
        counter = self.counters[second]
        counter["collisions"] += collisions
        counter["delivered"] += delivered
        counter["injected"] += injected
        self.frame_rows.append({
            "second": second,
            "sender": sender,
            "start_us": start_us,
            "end_us": end_us,
            "delay_us": end_us - generated_us,
            "airtime_us": end_us - start_us,
            "bytes": size,
            "has_pnt": int(has_pnt),
            "delivered": delivered,
        })

    def record_malformed(self, time_us: int, count: int = 1):
        self.counters[self.second_of(time_us)]["malformed"] += count

    def snapshot(self, second: int, vehicle: int, position: Position, speed: float,
                 nt: NeighborTable, crnt: Crnt, cp_pct: Optional[float]):
        seen = visibility(position, nt, crnt)
        counts = cars_sensed(nt, crnt)
        self.vehicle_rows.append({
            "second": second,
            "vehicle": vehicle,
            "x": position.x,
            "y": position.y,
            "speed_mps": speed,
            "direct_m": seen.direct_m,
            "crnt_m": seen.crnt_m,
            "direct_count": counts.direct_count,
            "crnt_count": counts.crnt_count,
            "frames_sent": self.frames_this_second[vehicle],
            "pnt_sent": self.pnts_this_second[vehicle],
            "cp_pct": np.nan if cp_pct is None else cp_pct,
        })

    def close_second(self):
        self.frames_this_second.clear()
        self.pnts_this_second.clear()

    def build_report(self, scenario: str, mode: str, seed: int, metadata: Dict[str, str]) -> MetricsReport:
        vehicles = pd.DataFrame(self.vehicle_rows, columns=VEHICLE_COLUMNS)
        frames = pd.DataFrame(self.frame_rows, columns=FRAME_COLUMNS)
        seconds = self._aggregate(vehicles, frames)
        logger.info(f"Report {scenario}/{mode}/seed {seed}: {len(vehicles)} vehicle rows, {len(seconds)} seconds")
        return MetricsReport(
            scenario=scenario,
            mode=mode,
            seed=seed,
            observer_id=self.observer_id,
            metadata=metadata,
            vehicles=vehicles,
            seconds=seconds,
            frames=frames,
            tx_counts=dict(sorted(self.tx_counts.items())),
        )

    def _aggregate(self, vehicles: pd.DataFrame, frames: pd.DataFrame) -> pd.DataFrame:
        if self.n_seconds == 0:
            return pd.DataFrame(columns=SECOND_COLUMNS)

        rows = []
        for second in range(1, self.n_seconds + 1):
            current = vehicles[vehicles["second"] == second]
            counter = self.counters.get(second, Counter())
            delivered_frames = frames[(frames["second"] == second) & (frames["delivered"] > 0)]
            row = {
                "second": second,
                "vehicles": len(current),
                "frames_sent": int(current["frames_sent"].sum()),
                "pnt_sent": int(current["pnt_sent"].sum()),
                "collisions": counter["collisions"],
                "delivered": counter["delivered"],
                "injected": counter["injected"],
                "malformed": counter["malformed"],
                "mean_delay_us": float(delivered_frames["delay_us"].mean()) if len(delivered_frames) else np.nan,
            }
            for column in ("direct_m", "crnt_m", "direct_count", "crnt_count"):
                values = current[column]
                row[f"{column}_mean"] = float(values.mean()) if len(values) else np.nan
                row[f"{column}_max"] = float(values.max()) if len(values) else np.nan
                row[f"{column}_min"] = float(values.min()) if len(values) else np.nan

            observer = current[current["vehicle"] == self.observer_id]
            for column in ("direct_m", "crnt_m", "direct_count", "crnt_count"):
                row[f"observer_{column}"] = float(observer[column].iloc[0]) if len(observer) else np.nan
            rows.append(row)
        return pd.DataFrame(rows, columns=SECOND_COLUMNS)
