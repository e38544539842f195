# crnt_sim/mobility/scenario.py
# Road network, obstacles and spawn rules, loaded from YAML scenario files.

import math
from enum import Enum
from functools import cached_property
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from shapely.geometry import Polygon
from shapely.geometry import box as shapely_box
from shapely.ops import unary_union

from ..core.config import read_yaml, settings
from ..core.errors import ConfigError
from ..core.logger import setup_logger
from ..protocol.models import Heading, Position

logger = setup_logger(__name__)

MIN_GAP_M = 5.0

Point2 = Tuple[float, float]


class ScenarioKind(str, Enum):
    FREEWAY = "freeway"
    CROSS = "cross"
    T_JUNCTION = "t_junction"
    MERGE = "merge"


class RoadSegment(BaseModel):
    """
    One-way stretch of road. Lane 0 sits next to the centerline and lanes
    are stacked to the right of the direction of travel.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    start: Point2
    end: Point2
    lanes: int = Field(default=1, ge=1)
    lane_width_m: float = Field(default=3.5, gt=0)
    next: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _non_degenerate(self):
        if self.start == self.end:
            raise ValueError(f"segment {self.id} has zero length")
        return self

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def direction(self) -> Point2:
        return ((self.end[0] - self.start[0]) / self.length, (self.end[1] - self.start[1]) / self.length)

    @property
    def heading(self) -> Heading:
        return Heading.from_vector(*self.direction)

    def lane_slots(self) -> int:
        """Spawn slots per lane; a segment feeding a join keeps its last 5 m clear."""
        usable = self.length - MIN_GAP_M / 2 if self.next else self.length
        return int(usable // MIN_GAP_M)

    def point_at(self, offset_m: float, lane: int) -> Position:
        dx, dy = self.direction
        # right of travel is (dy, -dx)
        shift = (lane + 0.5) * self.lane_width_m
        return Position(
            x=self.start[0] + dx * offset_m + dy * shift,
            y=self.start[1] + dy * offset_m - dx * shift,
        )

    def footprint(self) -> Polygon:
        dx, dy = self.direction
        width = self.lanes * self.lane_width_m
        (sx, sy), (ex, ey) = self.start, self.end
        return Polygon([(sx, sy), (ex, ey), (ex + dy * width, ey - dx * width), (sx + dy * width, sy - dx * width)])


class Obstacle(BaseModel):
    """Axis-aligned building footprint."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @model_validator(mode="after")
    def _positive_area(self):
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("obstacle must have positive width and height")
        return self

    def polygon(self) -> Polygon:
        return shapely_box(self.x_min, self.y_min, self.x_max, self.y_max)


class SpawnSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    segment: str
    count: int = Field(default=0, ge=0)
    speed_kmh: Tuple[float, float] = (20.0, 60.0)
    arrival_rate_per_s: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _speed_order(self):
        low, high = self.speed_kmh
        if low < 0 or high < low:
            raise ValueError(f"speed range {self.speed_kmh} must satisfy 0 <= min <= max")
        return self

    @property
    def speed_mps(self) -> Tuple[float, float]:
        return (self.speed_kmh[0] / 3.6, self.speed_kmh[1] / 3.6)


class ScriptedVehicle(BaseModel):
    """A vehicle pinned by the scenario file instead of drawn at random."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int = Field(ge=0)
    route: Tuple[str, ...] = Field(min_length=1)
    offset_m: float = Field(default=0.0, ge=0.0)
    lane: int = Field(default=0, ge=0)
    speed_mps: float = Field(default=0.0, ge=0.0)


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    kind: ScenarioKind
    segments: Tuple[RoadSegment, ...] = Field(min_length=1)
    obstacles: Tuple[Obstacle, ...] = ()
    spawn: Tuple[SpawnSpec, ...] = ()
    vehicles: Tuple[ScriptedVehicle, ...] = ()
    # default observer: the vehicle spawned nearest this point
    reference_point: Point2 = (0.0, 0.0)

    @model_validator(mode="after")
    def _consistent(self):
        ids = [segment.id for segment in self.segments]
        if len(ids) != len(set(ids)):
            raise ValueError("segment ids must be unique")
        known = set(ids)
        for segment in self.segments:
            missing = set(segment.next) - known
            if missing:
                raise ValueError(f"segment {segment.id} links to unknown segment(s) {sorted(missing)}")
        for spec in self.spawn:
            if spec.segment not in known:
                raise ValueError(f"spawn refers to unknown segment {spec.segment}")
        by_id = {segment.id: segment for segment in self.segments}
        seen_vehicles = set()
        for vehicle in self.vehicles:
            if vehicle.id in seen_vehicles:
                raise ValueError(f"scripted vehicle id {vehicle.id} used twice")
            seen_vehicles.add(vehicle.id)
            for here, there in zip(vehicle.route, vehicle.route[1:]):
                if here not in by_id or there not in by_id[here].next:
                    raise ValueError(f"vehicle {vehicle.id} route {here} -> {there} is not a road link")
            first = by_id.get(vehicle.route[0])
            if first is None:
                raise ValueError(f"vehicle {vehicle.id} starts on unknown segment {vehicle.route[0]}")
            if vehicle.offset_m > first.length or vehicle.lane >= first.lanes:
                raise ValueError(f"vehicle {vehicle.id} is placed off segment {first.id}")
        try:
            self.downstream_order()
        except CycleError as e:
            raise ValueError(f"road graph has a cycle: {e.args[1]}") from e
        if self.obstacles:
            road = unary_union([segment.footprint() for segment in self.segments])
            for obstacle in self.obstacles:
                if obstacle.polygon().intersection(road).area > 0:
                    raise ValueError(f"obstacle {obstacle.model_dump()} overlaps a road")
        return self

    @cached_property
    def by_id(self) -> Dict[str, RoadSegment]:
        return {segment.id: segment for segment in self.segments}

    def segment(self, segment_id: str) -> RoadSegment:
        return self.by_id[segment_id]

    def downstream_order(self) -> List[str]:
        """Segment ids with every successor ahead of its predecessors."""
        graph = {segment.id: set(segment.next) for segment in self.segments}
        return list(TopologicalSorter(graph).static_order())

    @cached_property
    def obstacle_polygons(self) -> List[Polygon]:
        return [obstacle.polygon() for obstacle in self.obstacles]

    def bounds(self) -> Tuple[float, float, float, float]:
        shape = unary_union([segment.footprint() for segment in self.segments])
        return shape.bounds


def list_presets(directory: Optional[Path] = None) -> List[str]:
    directory = directory or settings.SCENARIO_DIR
    return sorted(path.stem for path in Path(directory).glob("*.yaml"))


def load_scenario(name_or_path: Union[str, Path]) -> Scenario:
    """Load a preset by name or a scenario file by path."""
    path = Path(name_or_path)
    if not path.exists():
        path = settings.SCENARIO_DIR / f"{name_or_path}.yaml"
        if not path.exists():
            presets = ", ".join(list_presets()) or "none found"
            raise ConfigError(f"unknown scenario {name_or_path!r} (presets: {presets})")
    data = read_yaml(path)
    data.setdefault("name", path.stem)
    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "scenario"
        raise ConfigError(f"invalid scenario {path.name}: {location}: {first['msg']}") from e
    logger.info(f"Loaded scenario {scenario.name} ({scenario.kind.value}, {len(scenario.segments)} segments)")
    return scenario
