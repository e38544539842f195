# crnt_sim/mobility/visibility.py
# Building occlusion: a radio path is blocked when it crosses any obstacle.

import numpy as np
import shapely
from shapely.geometry import LineString

from ..protocol.models import Position
from .scenario import Scenario


def line_of_sight(a: Position, b: Position, scenario: Scenario) -> bool:
    if not scenario.obstacles or a == b:
        return True
    path = LineString([a.as_tuple(), b.as_tuple()])
    return not any(path.intersects(polygon) for polygon in scenario.obstacle_polygons)


def los_mask(origin_xy: np.ndarray, receivers_xy: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Batched line_of_sight from one point to k points; bool[k]."""
    receivers_xy = np.asarray(receivers_xy, dtype=float).reshape(-1, 2)
    clear = np.ones(len(receivers_xy), dtype=bool)
    if not scenario.obstacles or len(receivers_xy) == 0:
        return clear
    origin = np.broadcast_to(np.asarray(origin_xy, dtype=float), receivers_xy.shape)
    paths = shapely.linestrings(np.stack([origin, receivers_xy], axis=1))
    for polygon in scenario.obstacle_polygons:
        clear &= ~shapely.intersects(paths, polygon)
    # a zero-length path never crosses anything
    clear |= np.all(receivers_xy == origin, axis=1)
    return clear


class LosOracle:
    """Callable form of los_mask bound to one scenario, for the channel model."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def __call__(self, origin_xy: np.ndarray, receivers_xy: np.ndarray) -> np.ndarray:
        return los_mask(origin_xy, receivers_xy, self.scenario)
