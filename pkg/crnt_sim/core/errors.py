# crnt_sim/core/errors.py


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigError(SimulationError, ValueError):
    """Invalid run configuration, scenario file, or scenario capacity."""


class ProtocolError(SimulationError):
    pass


class NoNeighbors(ProtocolError, ValueError):
    """Congestion cannot be estimated without at least one neighbor (sparse area)."""


class EmptyTable(ProtocolError, ValueError):
    """A PNT cannot be built from an empty neighbor table."""


class MalformedBeacon(ProtocolError, ValueError):
    """Raised by the decoder; `reason` is a short machine-friendly tag."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        message = f"malformed beacon: {reason}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class BeaconTooLarge(ProtocolError, ValueError):
    pass


class IncomparableRuns(SimulationError):
    """Two reports that do not share scenario and seed."""


class ParityViolation(IncomparableRuns):
    """Baseline and CRNT runs sent different numbers of frames."""


class OutputError(SimulationError, OSError):
    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"cannot write {self.path}: {reason}")
