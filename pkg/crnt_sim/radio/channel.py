# crnt_sim/radio/channel.py
# Log-distance path loss, Nakagami-m block fading and SINR capture.

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..protocol.models import Position

# (sender_xy, receivers_xy[k, 2]) -> bool[k], True where the path is clear
LosOracle = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ChannelParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    m: float = Field(default=3.0, ge=0.5)
    # None: calibrated so the mean SINR at communication_range_m hits the threshold
    tx_power_dbm: Optional[float] = None
    pathloss_exponent: float = Field(default=2.2, gt=0)
    reference_loss_db: float = 47.0
    noise_floor_dbm: float = -99.0
    sinr_threshold_db: float = Field(default=10.0, gt=0)
    data_rate_bps: int = Field(default=6_000_000, gt=0)
    plcp_header_us: int = Field(default=8, gt=0)
    symbol_us: int = Field(default=8, gt=0)
    communication_range_m: float = Field(default=300.0, gt=0)

    @property
    def effective_tx_power_dbm(self) -> float:
        if self.tx_power_dbm is not None:
            return self.tx_power_dbm
        return calibrate_tx_power(self.communication_range_m, self)


class Outcome(str, Enum):
    DELIVERED = "Delivered"
    LOST_FADING = "LostFading"
    LOST_COLLISION = "LostCollision"
    LOST_BLOCKED = "LostBlocked"
    LOST_INJECTED = "LostInjected"


OUTCOMES = tuple(Outcome)
OUTCOME_CODE = {outcome: code for code, outcome in enumerate(OUTCOMES)}


class ReceptionOutcome(BaseModel):
    """One (frame, receiver) verdict."""
    model_config = ConfigDict(frozen=True)

    sender: int
    receiver: int
    outcome: Outcome
    rx_power_dbm: Optional[float] = None
    sinr_db: Optional[float] = None

    @property
    def delivered(self) -> bool:
        return self.outcome is Outcome.DELIVERED


@dataclass
class Transmission:
    sender: int
    payload: bytes
    start_us: int
    end_us: int
    sender_pos: Position
    generated_us: int = 0
    # per-receiver power gains indexed by vehicle id, drawn when the frame starts
    fading: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def create(cls, sender: int, payload: bytes, start_us: int, sender_pos: Position,
               params: ChannelParams, generated_us: Optional[int] = None,
               fading: Optional[np.ndarray] = None) -> "Transmission":
        return cls(
            sender=sender,
            payload=payload,
            start_us=start_us,
            end_us=start_us + airtime_us(len(payload), params),
            sender_pos=sender_pos,
            generated_us=start_us if generated_us is None else generated_us,
            fading=fading,
        )

    def overlaps(self, other: "Transmission") -> bool:
        return self.start_us < other.end_us and other.start_us < self.end_us


@dataclass
class ReceiverSet:
    ids: np.ndarray
    xy: np.ndarray

    @classmethod
    def from_positions(cls, positions: Mapping[int, Position]) -> "ReceiverSet":
        ids = sorted(positions)
        xy = np.array([positions[i].as_tuple() for i in ids], dtype=float).reshape(-1, 2)
        return cls(ids=np.array(ids, dtype=np.int64), xy=xy)

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class FrameReception:
    """Vectorised outcomes of one frame at every eligible receiver."""
    transmission: Transmission
    receiver_ids: np.ndarray
    codes: np.ndarray
    rx_power_dbm: np.ndarray
    sinr_db: np.ndarray

    def count(self, outcome: Outcome) -> int:
        return int(np.count_nonzero(self.codes == OUTCOME_CODE[outcome]))

    def receivers_with(self, outcome: Outcome) -> np.ndarray:
        return self.receiver_ids[self.codes == OUTCOME_CODE[outcome]]

    def outcomes(self) -> Iterator[ReceptionOutcome]:
        for receiver, code, power, sinr in zip(self.receiver_ids, self.codes, self.rx_power_dbm, self.sinr_db):
            outcome = OUTCOMES[code]
            computed = outcome is not Outcome.LOST_BLOCKED
            yield ReceptionOutcome(
                sender=self.transmission.sender,
                receiver=int(receiver),
                outcome=outcome,
                rx_power_dbm=float(power) if computed else None,
                sinr_db=float(sinr) if computed else None,
            )


def airtime_us(payload_bytes: int, params: ChannelParams) -> int:
    """PLCP header plus the payload rounded up to whole OFDM symbols."""
    if payload_bytes <= 0:
        raise ValueError(f"payload must be at least one byte, got {payload_bytes}")
    bits_per_symbol = params.data_rate_bps * params.symbol_us
    # ceil(bits * 1e6 / bits_per_symbol) on integers
    symbols = -(-(payload_bytes * 8 * 1_000_000) // bits_per_symbol)
    return params.plcp_header_us + symbols * params.symbol_us


def path_loss_db(distance_m, params: ChannelParams):
    distance = np.maximum(np.asarray(distance_m, dtype=float), 1.0)
    return params.reference_loss_db + 10.0 * params.pathloss_exponent * np.log10(distance)


def mean_rx_power_dbm(tx: Position, rx: Position, params: ChannelParams) -> float:
    return float(params.effective_tx_power_dbm - path_loss_db(tx.distance_to(rx), params))


def calibrate_tx_power(range_m: float, params: ChannelParams) -> float:
    if range_m <= 0:
        raise ValueError(f"range must be positive, got {range_m}")
    edge_dbm = params.noise_floor_dbm + params.sinr_threshold_db
    return edge_dbm + params.reference_loss_db + 10.0 * params.pathloss_exponent * math.log10(range_m)


def sample_fading_gain(rng: np.random.Generator, m: float, size=None):
    """Unit-mean Nakagami-m power gain, i.e. Gamma(shape=m, scale=1/m)."""
    if m < 0.5:
        raise ValueError(f"Nakagami shape must be >= 0.5, got {m}")
    return rng.gamma(m, 1.0 / m, size)


def _dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def _mw_to_db(mw):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(mw)


def _gains(tx: Transmission, receivers: ReceiverSet, params: ChannelParams,
           rng: np.random.Generator) -> np.ndarray:
    if tx.fading is None:
        return sample_fading_gain(rng, params.m, len(receivers))
    gains = np.ones(len(receivers))
    known = receivers.ids < len(tx.fading)
    gains[known] = tx.fading[receivers.ids[known]]
    return gains


def resolve_receptions(transmissions: Sequence[Transmission], receivers: ReceiverSet,
                       los: Optional[LosOracle], params: ChannelParams, rng: np.random.Generator,
                       targets: Optional[Sequence[Transmission]] = None) -> List[FrameReception]:
    """
    Resolve each target frame at every receiver against the other frames
    that overlap it in time.

    Blocked paths are decided before fading and blocked interferers add no
    power. Receivers farther than communication_range_m never decode. A
    receiver transmitting during the frame gets no outcome. A frame whose
    SINR misses the threshold while its SNR alone would clear it is a
    collision; otherwise the loss is put down to fading.
    """
    targets = list(transmissions) if targets is None else list(targets)
    frames = list(transmissions)
    for target in targets:
        if not any(target is frame for frame in frames):
            frames.append(target)
    if len(receivers) == 0 or not targets:
        return [FrameReception(t, receivers.ids[:0], np.zeros(0, dtype=np.int8),
                               np.zeros(0), np.zeros(0)) for t in targets]

    tx_power = params.effective_tx_power_dbm
    noise_mw = _dbm_to_mw(params.noise_floor_dbm)

    # received power of every frame at every receiver, blocked paths zeroed
    rx_mw: Dict[int, np.ndarray] = {}
    rx_dbm: Dict[int, np.ndarray] = {}
    clear: Dict[int, np.ndarray] = {}
    distance: Dict[int, np.ndarray] = {}
    for frame in frames:
        origin = np.array(frame.sender_pos.as_tuple())
        dist = np.hypot(*(receivers.xy - origin).T)
        mask = np.ones(len(receivers), dtype=bool) if los is None else np.asarray(los(origin, receivers.xy), dtype=bool)
        power_dbm = tx_power - path_loss_db(dist, params) + _mw_to_db(_gains(frame, receivers, params, rng))
        key = id(frame)
        distance[key] = dist
        clear[key] = mask
        rx_dbm[key] = power_dbm
        rx_mw[key] = np.where(mask, _dbm_to_mw(power_dbm), 0.0)

    results = []
    for target in targets:
        key = id(target)
        overlapping = [frame for frame in frames if frame is not target and frame.overlaps(target)]
        busy = {frame.sender for frame in overlapping} | {target.sender}
        eligible = ~np.isin(receivers.ids, list(busy))

        interference = np.zeros(len(receivers))
        for frame in overlapping:
            interference += rx_mw[id(frame)]
        signal = rx_mw[key]
        sinr_db = _mw_to_db(signal / (noise_mw + interference))
        snr_db = _mw_to_db(signal / noise_mw)

        codes = np.full(len(receivers), OUTCOME_CODE[Outcome.LOST_FADING], dtype=np.int8)
        captured = sinr_db >= params.sinr_threshold_db
        in_range = distance[key] <= params.communication_range_m
        codes[in_range & captured] = OUTCOME_CODE[Outcome.DELIVERED]
        codes[in_range & ~captured & (interference > 0) & (snr_db >= params.sinr_threshold_db)] = \
            OUTCOME_CODE[Outcome.LOST_COLLISION]
        codes[~clear[key]] = OUTCOME_CODE[Outcome.LOST_BLOCKED]

        results.append(FrameReception(
            transmission=target,
            receiver_ids=receivers.ids[eligible],
            codes=codes[eligible],
            rx_power_dbm=rx_dbm[key][eligible],
            sinr_db=sinr_db[eligible],
        ))
    return results
