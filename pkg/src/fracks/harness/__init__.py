"""Configuration, scenario orchestration, persistence and the CLI."""

from .config import Scenario, parse_config, scenario_from_document
from .runner import run_scenario, run_transport
from .verify import verify_suite

__all__ = ["Scenario", "parse_config", "scenario_from_document", "run_scenario", "run_transport", "verify_suite"]
