from .events import Event, EventKind, EventQueue
from .simulator import SimulationResult, Simulator, run
from .vehicle import NtDecision, NtTick, VehicleAgent, vehicle_tick_nt

__all__ = [
    "Event", "EventKind", "EventQueue", "NtDecision", "NtTick", "SimulationResult",
    "Simulator", "VehicleAgent", "run", "vehicle_tick_nt",
]
