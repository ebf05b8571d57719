"""Discrete-event WLAN simulator for SIP voice calls over 802.11a and 802.11b."""

from .config import ScenarioConfig, ScenarioError, load_paper_scenario, load_scenario, parse_scenario
from .report import RunReport, compare
from .runner import Simulation, run_scenario

__all__ = [
    "RunReport", "ScenarioConfig", "ScenarioError", "Simulation", "compare",
    "load_paper_scenario", "load_scenario", "parse_scenario", "run_scenario",
]
__version__ = "0.1.0"
