"""Deterministic event-driven MAC simulator."""

from .config import SimConfig, TrafficConfig, scenario_control, scenario_target_met
from .engine import Simulation, run

__all__ = ["SimConfig", "TrafficConfig", "Simulation", "run", "scenario_control", "scenario_target_met"]
