from .movement import VehicleState, spawn_arrivals, spawn_scenario, step
from .scenario import Obstacle, RoadSegment, Scenario, ScenarioKind, ScriptedVehicle, SpawnSpec, load_scenario
from .visibility import LosOracle, line_of_sight, los_mask

__all__ = [
    "LosOracle", "Obstacle", "RoadSegment", "Scenario", "ScenarioKind", "ScriptedVehicle",
    "SpawnSpec", "VehicleState", "line_of_sight", "load_scenario", "los_mask",
    "spawn_arrivals", "spawn_scenario", "step",
]
