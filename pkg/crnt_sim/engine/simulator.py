# crnt_sim/engine/simulator.py
# Deterministic discrete-event loop binding protocol, radio and mobility.

import math
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from ..core.config import ProtocolMode, RunConfig
from ..core.errors import ConfigError, MalformedBeacon
from ..core.logger import setup_logger
from ..metrics.collector import MetricsCollector, MetricsReport
from ..mobility.movement import VehicleState, spawn_arrivals, spawn_scenario, step
from ..mobility.scenario import Scenario, load_scenario
from ..mobility.visibility import LosOracle, los_mask
from ..protocol.codec import BASE_BEACON_BYTES, MAX_MESSAGE_BYTES, decode_beacon, encode_beacon, has_pnt
from ..protocol.models import Beacon, PntVerdict
from ..radio.channel import (
    OUTCOME_CODE,
    Outcome,
    ReceiverSet,
    Transmission,
    airtime_us,
    resolve_receptions,
    sample_fading_gain,
)
from ..radio.mac import schedule_tx
from .events import Event, EventKind, EventQueue
from .vehicle import NtTick, VehicleAgent, vehicle_tick_nt

logger = setup_logger(__name__)

RADIO_LOG_COLUMNS = ["time_us", "sender", "receiver", "outcome", "rx_power_dbm", "sinr_db"]
RNG_STREAMS = ("mobility", "timers", "mac", "channel", "injector")


class SimulationResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    report: MetricsReport
    events: List[Dict[str, Any]]
    radio_log: pd.DataFrame
    observer_id: Optional[int] = None
    events_processed: int = 0


class Simulator:
    """
    One run of one protocol mode. Time is integer microseconds; the queue
    orders by (time, insertion seq), every random draw comes from a
    per-concern stream seeded from config.seed, so a fixed config always
    replays the same event sequence.
    """

    def __init__(self, config: RunConfig, scenario: Optional[Scenario] = None):
        self.config = config
        self.scenario = scenario if scenario is not None else load_scenario(config.scenario)
        streams = np.random.SeedSequence(config.seed).spawn(len(RNG_STREAMS))
        self.rng = {name: np.random.default_rng(stream) for name, stream in zip(RNG_STREAMS, streams)}

        self.queue = EventQueue()
        self.now_us = 0
        self.duration_us = config.duration_us
        self.beacon_period_us = config.beacon_period_ms * 1000
        self.nt_period_us = config.nt_period_ms * 1000
        self.step_us = config.mobility_step_ms * 1000
        self.pnt_budget = MAX_MESSAGE_BYTES - BASE_BEACON_BYTES
        self.max_airtime_us = airtime_us(MAX_MESSAGE_BYTES, config.channel)
        self.los = LosOracle(self.scenario) if self.scenario.obstacles else None

        self.states: Dict[int, VehicleState] = {}
        self.agents: Dict[int, VehicleAgent] = {}
        self.air: List[Transmission] = []
        self.events: List[Dict[str, Any]] = []
        self.radio_rows: List[tuple] = []
        self.events_processed = 0
        self.nt_ticks: List[NtTick] = []
        self._receivers: Optional[ReceiverSet] = None

        initial = spawn_scenario(self.scenario, self.rng["mobility"])
        self.next_vehicle_id = max((state.id for state in initial), default=-1) + 1
        self.observer_id = self._pick_observer(initial)
        self.collector = MetricsCollector(config.duration_s, self.observer_id)

        if self.duration_us > 0:
            for state in initial:
                self._admit(state, 0)
            if self.step_us < self.duration_us:
                self.queue.push(self.step_us, EventKind.MOBILITY_STEP)
            for second in range(1, self.collector.n_seconds + 1):
                self.queue.push(second * 1_000_000, EventKind.METRICS_TICK)

    # ========================================================================
    # Setup
    # ========================================================================

    def _pick_observer(self, initial: List[VehicleState]) -> Optional[int]:
        if self.config.observer_id is not None:
            if all(state.id != self.config.observer_id for state in initial):
                raise ConfigError(f"observer_id {self.config.observer_id} is not a vehicle of scenario {self.scenario.name}")
            return self.config.observer_id
        if not initial:
            return None
        rx, ry = self.scenario.reference_point
        return min(initial, key=lambda s: (math.hypot(s.position.x - rx, s.position.y - ry), s.id)).id

    def _admit(self, state: VehicleState, now_us: int):
        self.states[state.id] = state
        self._receivers = None
        self.agents[state.id] = VehicleAgent(state.id, self.config)
        first = now_us + int(self.rng["timers"].integers(0, self.beacon_period_us))
        # NT ticks fall on one of the vehicle's beacon instants, spread over the NT period;
        # drawn in both modes so the timer stream stays identical
        beacons_per_nt = max(1, self.nt_period_us // self.beacon_period_us)
        first_nt = first + int(self.rng["timers"].integers(0, beacons_per_nt)) * self.beacon_period_us
        if first >= self.duration_us:
            return
        # pushed before the beacon timer at that instant so an armed PNT rides it
        if self.config.mode is ProtocolMode.CRNT and first_nt < self.duration_us:
            self.queue.push(first_nt, EventKind.NT_TIMER, state.id)
        self.queue.push(first, EventKind.BEACON_TIMER, state.id)

    # ========================================================================
    # Event loop
    # ========================================================================

    def run_until(self, until_us: Optional[int] = None) -> "Simulator":
        """Process every event at or before until_us (everything when None)."""
        handlers = {
            EventKind.BEACON_TIMER: self._on_beacon_timer,
            EventKind.NT_TIMER: self._on_nt_timer,
            EventKind.TX_START: self._on_tx_start,
            EventKind.TX_END: self._on_tx_end,
            EventKind.MOBILITY_STEP: self._on_mobility_step,
            EventKind.METRICS_TICK: self._on_metrics_tick,
        }
        while self.queue and (until_us is None or self.queue.peek_time() <= until_us):
            event = self.queue.pop()
            self.now_us = event.time_us
            self.events_processed += 1
            handlers[event.kind](event)
        if until_us is not None:
            self.now_us = max(self.now_us, until_us)
        return self

    def run(self) -> SimulationResult:
        logger.info(
            f"Run start: scenario={self.scenario.name} mode={self.config.mode.value} "
            f"seed={self.config.seed} duration={self.config.duration_s}s vehicles={len(self.states)}"
        )
        self.run_until(None)
        report = self.collector.build_report(
            scenario=self.scenario.name,
            mode=self.config.mode.value,
            seed=self.config.seed,
            metadata=self.config.metadata(),
        )
        logger.info(f"Run finished: {self.events_processed} events, {sum(report.tx_counts.values())} frames")
        return SimulationResult(
            report=report,
            events=self.events,
            radio_log=pd.DataFrame(self.radio_rows, columns=RADIO_LOG_COLUMNS),
            observer_id=self.observer_id,
            events_processed=self.events_processed,
        )

    def _log(self, event: Event, **fields):
        if self.config.event_log:
            self.events.append({"t_us": event.time_us, "seq": event.seq, "kind": event.kind.value,
                                "subject": event.subject, **fields})

    # ========================================================================
    # Timers
    # ========================================================================

    def _on_nt_timer(self, event: Event):
        vehicle = event.subject
        if vehicle not in self.states:
            return
        tick = vehicle_tick_nt(self.agents[vehicle], self.states[vehicle].position,
                               event.time_us // 1000, self.pnt_budget)
        self.nt_ticks.append(tick)
        logger.debug(f"NT tick vehicle={vehicle} t={tick.time_ms}ms cp={tick.cp_pct} -> {tick.decision.value}")
        self._log(event, decision=tick.decision.value, cp_pct=tick.cp_pct, entries=tick.entries)
        nxt = event.time_us + self.nt_period_us
        if nxt < self.duration_us:
            self.queue.push(nxt, EventKind.NT_TIMER, vehicle)

    def _on_beacon_timer(self, event: Event):
        vehicle = event.subject
        if vehicle not in self.states:
            return
        state = self.states[vehicle]
        beacon = Beacon(
            sender=vehicle,
            ts=event.time_us // 1000,
            interval=self.config.beacon_period_ms,
            position=state.position,
            speed=state.speed,
            heading=state.heading,
            pnt=self.agents[vehicle].take_pending_pnt(),
        )
        payload = encode_beacon(beacon)
        frame = Transmission(sender=vehicle, payload=payload, start_us=event.time_us, end_us=event.time_us,
                             sender_pos=state.position, generated_us=event.time_us)
        start = schedule_tx(event.time_us, self._medium_busy_until(frame, event.time_us),
                            self.rng["mac"], self.config.mac)
        self.queue.push(start, EventKind.TX_START, vehicle, frame)
        self._log(event, bytes=len(payload), pnt=beacon.pnt is not None, start_us=start)

        nxt = event.time_us + self.beacon_period_us
        if nxt < self.duration_us:
            self.queue.push(nxt, EventKind.BEACON_TIMER, vehicle)

    # ========================================================================
    # Channel
    # ========================================================================

    def _medium_busy_until(self, frame: Transmission, now_us: int) -> int:
        """Latest end among frames the sender can sense (in range, clear path) that began before now."""
        sensed = [other for other in self.air if other.start_us < now_us and other.sender != frame.sender]
        if not sensed:
            return -self.config.mac.difs_us
        origin = np.array(frame.sender_pos.as_tuple())
        senders = np.array([other.sender_pos.as_tuple() for other in sensed]).reshape(-1, 2)
        audible = np.hypot(*(senders - origin).T) <= self.config.channel.communication_range_m
        if self.los is not None:
            audible &= los_mask(origin, senders, self.scenario)
        ends = [other.end_us for other, heard in zip(sensed, audible) if heard]
        return max(ends, default=-self.config.mac.difs_us)

    def _on_tx_start(self, event: Event):
        frame: Transmission = event.payload
        busy_until = self._medium_busy_until(frame, event.time_us)
        if busy_until + self.config.mac.difs_us > event.time_us:
            deferred = schedule_tx(event.time_us, busy_until, self.rng["mac"], self.config.mac)
            self.queue.push(deferred, EventKind.TX_START, frame.sender, frame)
            self._log(event, deferred_to=deferred)
            return

        # block fading: one gain per receiver for the whole frame
        fading = sample_fading_gain(self.rng["channel"], self.config.channel.m, self.next_vehicle_id)
        on_air = Transmission.create(frame.sender, frame.payload, event.time_us, frame.sender_pos,
                                     self.config.channel, generated_us=frame.generated_us, fading=fading)
        self.air.append(on_air)
        self.collector.record_transmission(frame.sender, has_pnt=has_pnt(frame.payload))
        self.queue.push(on_air.end_us, EventKind.TX_END, frame.sender, on_air)
        self._log(event, end_us=on_air.end_us, bytes=len(frame.payload))

    def _receiver_set(self) -> ReceiverSet:
        # positions are piecewise constant between mobility steps
        if self._receivers is None:
            self._receivers = ReceiverSet.from_positions({v: s.position for v, s in self.states.items()})
        return self._receivers

    def _on_tx_end(self, event: Event):
        frame: Transmission = event.payload
        overlapping = [other for other in self.air if other is frame or other.overlaps(frame)]
        reception = resolve_receptions(overlapping, self._receiver_set(), self.los, self.config.channel,
                                       self.rng["channel"], targets=[frame])[0]

        delivered_ids = reception.receivers_with(Outcome.DELIVERED)
        injected = 0
        if len(delivered_ids) and self.config.injector.active_at(event.time_us):
            drop = self.rng["injector"].random(len(delivered_ids)) < self.config.injector.drop_fraction
            injected = int(drop.sum())
            if injected:
                reception.codes[np.isin(reception.receiver_ids, delivered_ids[drop])] = OUTCOME_CODE[Outcome.LOST_INJECTED]
                delivered_ids = delivered_ids[~drop]

        collisions = reception.count(Outcome.LOST_COLLISION)
        if self.config.radio_log:
            self._record_radio(event.time_us, reception)

        beacon = None
        if len(delivered_ids):
            try:
                beacon = decode_beacon(frame.payload)
            except MalformedBeacon as e:
                logger.warning(f"Dropping frame from {frame.sender}: {e}")
                self.collector.record_malformed(event.time_us, len(delivered_ids))
                delivered_ids = delivered_ids[:0]

        self.collector.record_frame(
            sender=frame.sender, start_us=frame.start_us, end_us=frame.end_us,
            generated_us=frame.generated_us, size=len(frame.payload),
            has_pnt=has_pnt(frame.payload),
            delivered=len(delivered_ids), collisions=collisions, injected=injected,
        )

        now_ms = event.time_us // 1000
        verdicts = []
        for receiver in delivered_ids:
            verdict = self.agents[int(receiver)].receive(beacon, now_ms)
            if verdict is not None and verdict is not PntVerdict.NO_PNT:
                verdicts.append((int(receiver), verdict.value))
        if verdicts:
            logger.debug(f"PNT from {frame.sender} at {now_ms}ms: {verdicts}")
        self._log(event, delivered=len(delivered_ids), collisions=collisions, injected=injected,
                  verdicts=verdicts)

        horizon = event.time_us - self.max_airtime_us - self.config.mac.difs_us
        self.air = [other for other in self.air if other.end_us > horizon]

    def _record_radio(self, time_us: int, reception):
        sender_pos = np.array(reception.transmission.sender_pos.as_tuple())
        for outcome in reception.outcomes():
            if outcome.outcome is Outcome.LOST_FADING:
                rx = self.states[outcome.receiver].position
                if math.hypot(rx.x - sender_pos[0], rx.y - sender_pos[1]) > self.config.channel.communication_range_m:
                    continue
            self.radio_rows.append((time_us, outcome.sender, outcome.receiver, outcome.outcome.value,
                                    outcome.rx_power_dbm, outcome.sinr_db))

    # ========================================================================
    # Mobility and metrics
    # ========================================================================

    def _on_mobility_step(self, event: Event):
        dt = self.step_us / 1_000_000
        moved = step(self.states.values(), dt, self.scenario)
        alive = {state.id for state in moved}
        for gone in [vehicle for vehicle in self.states if vehicle not in alive]:
            del self.agents[gone]
        self.states = {state.id: state for state in moved}
        self._receivers = None

        arrivals, self.next_vehicle_id = spawn_arrivals(moved, self.scenario, self.rng["mobility"], dt,
                                                        self.next_vehicle_id)
        for state in arrivals:
            self._admit(state, event.time_us)
        self._log(event, vehicles=len(self.states), arrivals=len(arrivals))

        nxt = event.time_us + self.step_us
        if nxt < self.duration_us:
            self.queue.push(nxt, EventKind.MOBILITY_STEP)

    def _on_metrics_tick(self, event: Event):
        second = event.time_us // 1_000_000
        now_ms = event.time_us // 1000
        for vehicle in sorted(self.states):
            agent = self.agents[vehicle]
            state = self.states[vehicle]
            nt = agent.direct_nt(state.position, now_ms)
            crnt = agent.refresh(now_ms)
            self.collector.snapshot(second, vehicle, state.position, state.speed, nt, crnt, agent.last_cp)
        self.collector.close_second()
        self._log(event, second=second, vehicles=len(self.states))

    # ========================================================================
    # Inspection helpers
    # ========================================================================

    def nt_decisions(self, vehicle: Optional[int] = None) -> List[NtTick]:
        return [tick for tick in self.nt_ticks if vehicle is None or tick.vehicle == vehicle]


def run(config: RunConfig, scenario: Optional[Scenario] = None) -> SimulationResult:
    """Validate, build and execute one simulation."""
    return Simulator(config, scenario).run()

