# crnt_sim/mobility/movement.py
# Constant-speed lane following with a 5 m speed-matching floor.

from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import ConfigError
from ..core.logger import setup_logger
from ..protocol.models import Heading, Position
from .scenario import MIN_GAP_M, RoadSegment, Scenario

logger = setup_logger(__name__)

SeedLike = Union[int, np.random.Generator]


class VehicleState(BaseModel):
    """Kinematic state of one vehicle; route[0] is the segment it is on."""
    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0)
    position: Position
    speed: float = Field(ge=0.0)
    heading: Heading
    lane: int = Field(ge=0)
    route: Tuple[str, ...]
    offset_m: float = Field(ge=0.0)

    @property
    def segment_id(self) -> str:
        return self.route[0]


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def choose_route(scenario: Scenario, start: str, rng: np.random.Generator) -> Tuple[str, ...]:
    route = [start]
    while scenario.segment(route[-1]).next:
        options = scenario.segment(route[-1]).next
        route.append(options[int(rng.integers(len(options)))])
    return tuple(route)


def place(scenario: Scenario, vehicle_id: int, route: Tuple[str, ...], offset_m: float,
          lane: int, speed: float) -> VehicleState:
    segment = scenario.segment(route[0])
    return VehicleState(
        id=vehicle_id,
        position=segment.point_at(offset_m, lane),
        speed=speed,
        heading=segment.heading,
        lane=lane,
        route=route,
        offset_m=offset_m,
    )


def spawn_scenario(scenario: Scenario, seed: SeedLike) -> List[VehicleState]:
    """
    Scripted vehicles first, then every spawn spec's count drawn without
    replacement from a 5 m slot lattice per lane. Raises ConfigError when a
    segment cannot hold the requested count.
    """
    rng = _rng(seed)
    states = [
        place(scenario, vehicle.id, vehicle.route, vehicle.offset_m, vehicle.lane, vehicle.speed_mps)
        for vehicle in scenario.vehicles
    ]
    reserved: Set[int] = {vehicle.id for vehicle in scenario.vehicles}

    requested: Dict[str, int] = defaultdict(int)
    for spec in scenario.spawn:
        requested[spec.segment] += spec.count
    for segment_id, count in requested.items():
        segment = scenario.segment(segment_id)
        capacity = segment.lanes * segment.lane_slots()
        if count > capacity:
            raise ConfigError(
                f"segment {segment_id} holds at most {capacity} vehicles at {MIN_GAP_M:g} m spacing "
                f"({segment.lanes} lanes x {segment.length:g} m), {count} requested"
            )

    taken: Dict[str, Set[int]] = defaultdict(set)
    for state in states:
        segment = scenario.segment(state.segment_id)
        # keep drawn vehicles a full gap away from pinned ones
        for index in range(segment.lane_slots()):
            if abs((index + 0.5) * MIN_GAP_M - state.offset_m) < MIN_GAP_M:
                taken[segment.id].add(index * segment.lanes + state.lane)

    next_id = 0
    for spec in scenario.spawn:
        if spec.count == 0:
            continue
        segment = scenario.segment(spec.segment)
        free = np.array(sorted(set(range(segment.lanes * segment.lane_slots())) - taken[segment.id]))
        if spec.count > len(free):
            raise ConfigError(f"segment {segment.id} has only {len(free)} free slots, {spec.count} requested")
        slots = rng.choice(free, size=spec.count, replace=False)
        low, high = spec.speed_mps
        for slot in sorted(int(s) for s in slots):
            taken[segment.id].add(slot)
            while next_id in reserved:
                next_id += 1
            states.append(place(
                scenario, next_id, choose_route(scenario, segment.id, rng),
                offset_m=(slot // segment.lanes + 0.5) * MIN_GAP_M,
                lane=slot % segment.lanes,
                speed=float(rng.uniform(low, high)),
            ))
            next_id += 1

    states.sort(key=lambda state: state.id)
    logger.info(f"Spawned {len(states)} vehicles in scenario {scenario.name}")
    return states


def _advance(scenario: Scenario, state: VehicleState, route: Tuple[str, ...], offset_m: float,
             speed: float) -> VehicleState:
    segment = scenario.segment(route[0])
    lane = min(state.lane, segment.lanes - 1)
    return state.model_copy(update={
        "position": segment.point_at(offset_m, lane),
        "heading": segment.heading,
        "lane": lane,
        "route": route,
        "offset_m": offset_m,
        "speed": speed,
    })


def _first_in_line(scenario: Scenario,
                   waiting: Dict[Tuple[str, int], List[VehicleState]]) -> Dict[Tuple[str, int], Tuple[float, int]]:
    """
    For every lane entered across a join, the (distance to the join, id) of
    the closest front vehicle heading into it before the step.
    """
    first: Dict[Tuple[str, int], Tuple[float, int]] = {}
    for (segment_id, _), queue in waiting.items():
        front = max(queue, key=lambda state: (state.offset_m, -state.id))
        if len(front.route) < 2:
            continue
        following = scenario.segment(front.route[1])
        key = (following.id, min(front.lane, following.lanes - 1))
        claim = (scenario.segment(segment_id).length - front.offset_m, front.id)
        if key not in first or claim < first[key]:
            first[key] = claim
    return first


def step(states: Iterable[VehicleState], dt: float, scenario: Scenario) -> List[VehicleState]:
    """
    Advance every vehicle by dt seconds.

    Segments are processed downstream first and lanes leader first, so each
    follower is clamped against its leader's new position. The leader of the
    front vehicle on a segment is the tail of the lane it joins next, with the
    gap measured across the join. A vehicle that would close within 5 m of its
    leader stops 5 m behind it and takes the leader's speed.

    Where several lanes feed one lane, only the front vehicle closest to the
    join (lowest id on a tie) may come within 5 m of it; the others hold 5 m
    short. Overflow past a segment end carries onto the next route segment
    and a vehicle past the end of its last segment is despawned.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")

    waiting: Dict[Tuple[str, int], List[VehicleState]] = defaultdict(list)
    for state in states:
        waiting[(state.segment_id, state.lane)].append(state)
    first = _first_in_line(scenario, waiting)

    # (segment, lane) -> moved vehicles, tail (smallest offset) last
    placed: Dict[Tuple[str, int], List[VehicleState]] = defaultdict(list)
    moved: List[VehicleState] = []
    despawned = 0

    for segment_id in scenario.downstream_order():
        segment = scenario.segment(segment_id)
        for lane in range(segment.lanes):
            queue = sorted(waiting.get((segment_id, lane), []), key=lambda s: (-s.offset_m, s.id))
            for state in queue:
                leader, leader_at = _leader(scenario, state, segment, placed)
                target = state.offset_m + state.speed * dt
                speed = state.speed
                if leader is not None and target > leader_at - MIN_GAP_M:
                    target = max(state.offset_m, leader_at - MIN_GAP_M)
                    speed = leader.speed
                if not placed[(segment_id, lane)] and not _has_right_of_way(scenario, state, segment, first):
                    target = max(state.offset_m, min(target, segment.length - MIN_GAP_M))

                if target < segment.length:
                    new = _advance(scenario, state, state.route, target, speed)
                elif len(state.route) == 1:
                    despawned += 1
                    continue
                else:
                    new = _carry_over(scenario, state, target - segment.length, speed, placed)
                placed[(new.segment_id, new.lane)].append(new)
                moved.append(new)

    if despawned:
        logger.debug(f"{despawned} vehicle(s) left the road")
    moved.sort(key=lambda state: state.id)
    return moved


def _has_right_of_way(scenario: Scenario, state: VehicleState, segment: RoadSegment,
                      first: Dict[Tuple[str, int], Tuple[float, int]]) -> bool:
    if len(state.route) < 2:
        return True
    following = scenario.segment(state.route[1])
    claim = first.get((following.id, min(state.lane, following.lanes - 1)))
    return claim is None or claim == (segment.length - state.offset_m, state.id)


def _leader(scenario: Scenario, state: VehicleState, segment: RoadSegment,
            placed: Dict[Tuple[str, int], List[VehicleState]]) -> Tuple[Optional[VehicleState], float]:
    """
    The moved vehicle directly ahead in the same lane and its offset measured
    along the follower's segment. With nobody ahead on the segment itself,
    the tail of the lane the follower would join next leads from past the join.
    """
    ahead = placed[(segment.id, state.lane)]
    if ahead:
        return ahead[-1], ahead[-1].offset_m
    if len(state.route) > 1:
        following = scenario.segment(state.route[1])
        beyond = placed[(following.id, min(state.lane, following.lanes - 1))]
        if beyond:
            return beyond[-1], segment.length + beyond[-1].offset_m
    return None, 0.0


def _carry_over(scenario: Scenario, state: VehicleState, overflow: float, speed: float,
                placed: Dict[Tuple[str, int], List[VehicleState]]) -> VehicleState:
    following = scenario.segment(state.route[1])
    lane = min(state.lane, following.lanes - 1)
    occupants = placed[(following.id, lane)]
    tail = occupants[-1] if occupants else None
    # step() already clamped against this tail, so overflow stays non-negative
    if tail is not None and overflow > tail.offset_m - MIN_GAP_M:
        overflow = tail.offset_m - MIN_GAP_M
        speed = tail.speed
    return _advance(scenario, state.model_copy(update={"lane": lane}), state.route[1:], overflow, speed)


def spawn_arrivals(states: List[VehicleState], scenario: Scenario, rng: np.random.Generator,
                   dt: float, next_id: int) -> Tuple[List[VehicleState], int]:
    """
    Poisson arrivals at the start of each spawn segment with a positive
    arrival rate. An arrival whose lane has no 5 m of room is dropped.
    Returns the new vehicles and the next unused id.
    """
    arrivals: List[VehicleState] = []
    tails: Dict[Tuple[str, int], float] = {}
    for state in states:
        key = (state.segment_id, state.lane)
        tails[key] = min(tails.get(key, state.offset_m), state.offset_m)
        if len(state.route) > 1:
            # a car just short of a join blocks the start of the lane it enters
            segment = scenario.segment(state.segment_id)
            if segment.length - state.offset_m < MIN_GAP_M:
                following = scenario.segment(state.route[1])
                tails[(following.id, min(state.lane, following.lanes - 1))] = 0.0

    for spec in scenario.spawn:
        if spec.arrival_rate_per_s <= 0:
            continue
        segment = scenario.segment(spec.segment)
        low, high = spec.speed_mps
        for _ in range(int(rng.poisson(spec.arrival_rate_per_s * dt))):
            lane = int(rng.integers(segment.lanes))
            speed = float(rng.uniform(low, high))
            route = choose_route(scenario, segment.id, rng)
            tail: Optional[float] = tails.get((segment.id, lane))
            if tail is not None and tail < MIN_GAP_M:
                continue
            arrivals.append(place(scenario, next_id, route, 0.0, lane, speed))
            tails[(segment.id, lane)] = 0.0
            next_id += 1
    return arrivals, next_id
