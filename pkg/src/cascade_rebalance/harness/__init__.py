"""File-backed runs: config, event engine, simulation, reports and the CLI."""

from .config import RunConfig, load_config
from .engine import CostReport, EventResult, MarketData, Portfolio, SimulationResult, run_event, simulate

__all__ = [
    "CostReport", "EventResult", "MarketData", "Portfolio", "RunConfig", "SimulationResult", "load_config",
    "run_event", "simulate",
]
