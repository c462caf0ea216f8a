"""Discrete-event simulator for flying ad-hoc network routing."""
from .engine import Simulation, run
from .metrics import MetricsReport
from .scenario import AbcParams, AnnParams, HirolParams, Scenario, ScenarioError

__all__ = ["AbcParams", "AnnParams", "HirolParams", "MetricsReport", "Scenario", "ScenarioError",
           "Simulation", "run"]
