"""Distributed disturbance-observer-based leader following under switching graphs."""

from .graph import CommGraph, SwitchingSchedule, grounded, laplacian, validate_connected
from .model import AgentModel, DisturbanceExosystem, LeaderExosystem, mass_damper_spring
from .scenario import Scenario, load_scenario, paper_example, parse_scenario
from .sim import assemble, convergence_time, integrate, max_error_after
from .synthesis import GainSet, synthesize, validate_gains

__version__ = "0.1.0"
