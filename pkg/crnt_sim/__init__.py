"""Discrete-event VANET simulator for beacon-piggybacked neighbor tables."""

__version__ = "1.0.0"
