"""Peremptory-strike simulation and strike-exhaustion estimation."""
__version__ = "0.1.0"
