"""Cascading waterfall rebalancing engine.

The core modules are pure: :mod:`market_data` turns prices into risk
statistics, :mod:`weights` into per-asset weight bands, :mod:`trade_sizing`
into order size bounds, and :mod:`cascade` into an order plan. :mod:`baseline`
is the per-asset comparison mechanism; :mod:`harness` wires everything to
files and a CLI.
"""

from .baseline import SimplePlan, simple_plan
from .cascade import (
    EventContext, Fill, FillReport, Holding, RebalancePlan, adjust_after_sells, capacity_to_fill,
    capacity_to_fill_alt, plan_cascade, prepare_event, sequential_fill_oracle, size_orders,
)
from .errors import RebalanceError
from .trade_sizing import SizingConfig, SizingInputs, TradeSizeBounds, size_bounds
from .weights import Scheme, WeightBounds, WeightConfig, compute_weight_table

__all__ = [
    "EventContext", "Fill", "FillReport", "Holding", "RebalanceError", "RebalancePlan", "Scheme", "SimplePlan",
    "SizingConfig", "SizingInputs", "TradeSizeBounds", "WeightBounds", "WeightConfig", "adjust_after_sells",
    "capacity_to_fill", "capacity_to_fill_alt", "compute_weight_table", "plan_cascade", "prepare_event",
    "sequential_fill_oracle", "simple_plan", "size_bounds", "size_orders",
]

__version__ = "0.1.0"
