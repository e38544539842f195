from .channel import (
    ChannelParams,
    FrameReception,
    Outcome,
    ReceiverSet,
    ReceptionOutcome,
    Transmission,
    airtime_us,
    calibrate_tx_power,
    mean_rx_power_dbm,
    resolve_receptions,
    sample_fading_gain,
)
from .mac import MacParams, schedule_tx

__all__ = [
    "ChannelParams", "FrameReception", "MacParams", "Outcome", "ReceiverSet",
    "ReceptionOutcome", "Transmission", "airtime_us", "calibrate_tx_power",
    "mean_rx_power_dbm", "resolve_receptions", "sample_fading_gain", "schedule_tx",
]
