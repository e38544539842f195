# crnt_sim/radio/mac.py
# Broadcast CSMA/CA: one DIFS plus a fixed-window backoff, no ACK, no retry.

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class MacParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cw_min: int = Field(default=15, ge=0)
    # carried for completeness; broadcast frames never double the window
    cw_max: int = Field(default=1023, ge=0)
    slot_us: int = Field(default=16, gt=0)
    # unused by broadcast traffic (nothing is acknowledged)
    sifs_us: int = Field(default=32, gt=0)
    difs_us: int = Field(default=64, gt=0)

    @model_validator(mode="after")
    def _window_order(self):
        if self.cw_min > self.cw_max:
            raise ValueError(f"cw_min ({self.cw_min}) exceeds cw_max ({self.cw_max})")
        return self


def draw_backoff_slots(rng: np.random.Generator, mac: MacParams) -> int:
    return int(rng.integers(0, mac.cw_min + 1))


def schedule_tx(now_us: int, medium_busy_until: int, rng: np.random.Generator, mac: MacParams) -> int:
    """
    Start time for a frame that becomes ready at now_us.

    Transmits immediately when the medium has been idle for a full DIFS;
    otherwise waits for the medium, a DIFS and uniform{0..cw_min} slots.
    """
    if medium_busy_until + mac.difs_us <= now_us:
        return now_us
    return medium_busy_until + mac.difs_us + draw_backoff_slots(rng, mac) * mac.slot_us
