"""End-to-end events: prices -> statistics -> weights -> sizing -> plans -> costs.

One :class:`Portfolio` carries holdings across events. Undeployed flow (below
minimum block sizes, or short sell proceeds) stays as pending cash and joins
the next event's flow, so holdings value plus pending cash always equals the
previous total plus the flow.
"""

from __future__ import annotations

import csv
import logging
import random
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Sequence

from ..baseline import SimplePlan, simple_plan
from ..cascade import (
    SELL, EventContext, Fill, FillReport, Holding, RebalancePlan, ScheduledOrder, adjust_after_sells,
    exact_fills, plan_cascade, prepare_event,
)
from ..errors import (
    DataError, DegenerateError, InsufficientDataError, ParseError, ValidationError,
)
from ..market_data import (
    PriceSeries, ReturnSeries, RiskStats, covariance_matrix, load_price_file, log_returns, risk_stats_at,
)
from ..money import ZERO, divide, usd, wide_divide, wide_multiply
from ..trade_sizing import SizingInputs, bounds_for, load_sizing_inputs
from ..weights import WeightTable, compute_weight_table
from .config import DEFAULT_NETWORK, RunConfig, participating_assets

log = logging.getLogger(__name__)


@dataclass
class Portfolio:
    quantities: dict[str, Decimal]
    networks: dict[str, str]
    pending: Decimal = ZERO

    def value(self, prices: dict[str, Decimal]) -> Decimal:
        return sum((usd(wide_multiply(q, prices[a])) for a, q in self.quantities.items()), ZERO)


def load_holdings(path: str | Path) -> Portfolio:
    """``asset,quantity[,network]`` rows; quantity in asset units."""
    quantities, networks = {}, {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if "asset" not in header or "quantity" not in header:
            raise ParseError(f"{path}: need asset and quantity columns", 1)
        reader.fieldnames = header
        for row in reader:
            asset = (row["asset"] or "").strip()
            if not asset:
                raise ParseError("missing asset", reader.line_num)
            if asset in quantities:
                raise ValidationError(f"line {reader.line_num}: duplicate asset {asset}")
            try:
                q = Decimal(row["quantity"].strip())
            except (InvalidOperation, AttributeError):
                raise ParseError("cannot parse quantity", reader.line_num) from None
            if q < 0:
                raise ValidationError(f"line {reader.line_num}: negative quantity")
            quantities[asset] = q
            networks[asset] = (row.get("network") or "").strip() or DEFAULT_NETWORK
    return Portfolio(quantities, networks)


def load_flows(path: str | Path) -> list[tuple[date, Decimal]]:
    """``date,flow_usd`` rows, returned in date order."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if header[:2] != ["date", "flow_usd"]:
            raise ParseError(f"{path}: header must be date,flow_usd", 1)
        reader.fieldnames = header
        for row in reader:
            try:
                out.append((date.fromisoformat(row["date"].strip()), usd(Decimal(row["flow_usd"].strip()))))
            except (ValueError, InvalidOperation, AttributeError):
                raise ParseError("cannot parse flow row", reader.line_num) from None
    out.sort(key=lambda r: r[0])
    return out


class MarketData:
    """Price series and returns for every asset named in the config."""

    def __init__(self, series: dict[str, PriceSeries]):
        self.series = series
        self._returns: dict[str, ReturnSeries] = {}

    @classmethod
    def from_files(cls, paths: Sequence[Path]) -> "MarketData":
        series = {}
        for p in paths:
            for asset, s in load_price_file(p).items():
                if asset in series:
                    raise ValidationError(f"asset {asset} appears in more than one price file")
                series[asset] = s
        return cls(series)

    def returns(self, asset: str) -> ReturnSeries:
        if asset not in self._returns:
            self._returns[asset] = log_returns(self.series[asset])
        return self._returns[asset]

    def price(self, asset: str, day: date) -> Decimal | None:
        s = self.series.get(asset)
        return None if s is None else s.close_on(day)


@dataclass(frozen=True)
class MechanismCost:
    orders: int
    gas: Decimal
    slippage: Decimal

    @property
    def total(self) -> Decimal:
        return self.gas + self.slippage

    def __add__(self, other: "MechanismCost") -> "MechanismCost":
        return MechanismCost(self.orders + other.orders, self.gas + other.gas, self.slippage + other.slippage)


NO_COST = MechanismCost(0, ZERO, ZERO)


@dataclass(frozen=True)
class CostReport:
    cascade: MechanismCost
    simple: MechanismCost

    def __add__(self, other: "CostReport") -> "CostReport":
        return CostReport(self.cascade + other.cascade, self.simple + other.simple)


EMPTY_COSTS = CostReport(NO_COST, NO_COST)


def schedule_cost(
    schedule: Sequence[ScheduledOrder],
    sizing_inputs: dict[str, SizingInputs],
    config: RunConfig,
) -> MechanismCost:
    """Gas per order plus a quadratic impact charge ``size^2 / (divisor * depth)``.

    This is a reporting device for comparing mechanisms, not a price model.
    """
    gas = slippage = ZERO
    for order in schedule:
        inputs = sizing_inputs[order.asset_id]
        gas += usd(config.cost.gas_per_order if config.cost.gas_per_order is not None else inputs.avg_gas_fees)
        slippage += divide(order.amount * order.amount, config.cost.impact_divisor * inputs.liquidity_pool_depth)
    return MechanismCost(len(schedule), gas, slippage)


@dataclass
class EventResult:
    event_index: int
    date: date
    flow: Decimal
    weights: WeightTable | None
    stats: dict[str, RiskStats]
    context: EventContext | None
    plan: RebalancePlan | None
    simple: SimplePlan | None
    costs: CostReport
    excluded: dict[str, str] = field(default_factory=dict)
    value_before: Decimal = ZERO
    value_after: Decimal = ZERO
    pending_before: Decimal = ZERO
    pending_after: Decimal = ZERO
    skipped: str | None = None


def _fills(plan: RebalancePlan, noise: float, rng: random.Random) -> FillReport:
    if noise <= 0:
        return exact_fills(plan)
    fills = []
    for o in plan.schedule:
        if o.side != SELL:
            continue
        haircut = Decimal(repr(rng.random() * noise))
        fills.append(Fill(o.sequence, o.asset_id, o.amount, usd(o.amount * (1 - haircut))))
    return FillReport(tuple(fills))


def run_event(
    config: RunConfig,
    day: date,
    flow,
    portfolio: Portfolio | None = None,
    market: MarketData | None = None,
    event_index: int = 0,
    sizing_inputs: dict[str, SizingInputs] | None = None,
    rng: random.Random | None = None,
) -> EventResult:
    """Plan one event with both mechanisms and apply the cascade fills.

    ``portfolio`` is updated in place. Assets without enough history, with
    unusable size bounds, or whose network sits this event out, keep their
    holdings and are left out of the event total.
    """
    portfolio = portfolio if portfolio is not None else load_holdings(config.holdings)
    market = market if market is not None else MarketData.from_files(config.prices)
    sizing_inputs = sizing_inputs if sizing_inputs is not None else load_sizing_inputs(config.sizing)
    rng = rng if rng is not None else random.Random(config.seed)
    flow = usd(flow)

    prices = {}
    for asset in portfolio.quantities:
        p = market.price(asset, day)
        if p is None:
            raise InsufficientDataError(f"no price for {asset} on {day}")
        prices[asset] = p

    excluded: dict[str, str] = {}
    active = participating_assets(event_index, config, portfolio.networks)
    for asset in portfolio.quantities:
        if asset not in active:
            excluded[asset] = "network not rebalancing this event"

    stats: dict[str, RiskStats] = {}
    for asset in active:
        if asset not in market.series:
            excluded[asset] = "no price history"
            continue
        try:
            s = risk_stats_at(market.returns(asset), day, config.window, config.weights.theta, config.min_history)
        except InsufficientDataError as exc:
            excluded[asset] = str(exc)
            continue
        if not s.volatility > 0:
            excluded[asset] = "zero volatility"
            continue
        stats[asset] = s

    sizes, conflicts = bounds_for({a: sizing_inputs[a] for a in stats if a in sizing_inputs}, config.sizing_params)
    excluded.update(conflicts)
    for asset in stats:
        if asset not in sizing_inputs:
            excluded[asset] = "no sizing inputs"
    tradable = [a for a in portfolio.quantities if a in stats and a in sizes]
    for asset, why in excluded.items():
        if why != "network not rebalancing this event":
            log.warning("%s: %s excluded: %s", day, asset, why)

    value_before = portfolio.value(prices)
    pending_before = portfolio.pending
    tbd = flow + portfolio.pending
    result = EventResult(event_index, day, flow, None, stats, None, None, None, EMPTY_COSTS, excluded,
                         value_before=value_before, pending_before=pending_before)
    if not tradable:
        portfolio.pending = tbd
        result.value_after, result.pending_after = value_before, tbd
        result.skipped = "no tradable assets"
        return result

    cov = covariance_matrix([market.returns(a) for a in tradable], config.window, day, config.min_history)
    table = compute_weight_table(
        {a: stats[a].volatility for a in tradable},
        {a: stats[a].vvv_volatility for a in tradable},
        cov, config.weights, config.full_exit & set(tradable),
    )
    holdings = [Holding(a, portfolio.quantities[a], prices[a]) for a in tradable]
    active_value = sum((h.current_amount for h in holdings), ZERO)
    # a withdrawal larger than the tradable sleeve waits for later events
    event_flow = max(tbd, -active_value)
    ctx = prepare_event(holdings, event_flow, config.full_exit & set(tradable), event_index)
    plan = plan_cascade(ctx, table.bounds, sizes, config.delay_seconds)
    simple = simple_plan(ctx, table.bounds, sizes, config.delay_seconds)

    fills = _fills(plan, config.fill_noise, rng)
    executed = adjust_after_sells(plan, fills) if config.fill_noise > 0 else plan
    realized = {f.sequence: f.realized for f in fills.fills}
    deployed = ZERO
    for order in executed.schedule:
        amount = realized.get(order.sequence, order.amount) if order.side == SELL else order.amount
        if order.side == SELL and amount == 0:
            continue
        # a short sell fill still removes the placed quantity
        units = wide_divide(order.amount, prices[order.asset_id])
        portfolio.quantities[order.asset_id] = max(portfolio.quantities[order.asset_id] + units, ZERO)
        deployed += amount
    portfolio.pending = tbd - deployed

    result.weights = table
    result.context = ctx
    result.plan = executed
    result.simple = simple
    result.costs = CostReport(
        schedule_cost(executed.schedule, sizing_inputs, config),
        schedule_cost(simple.schedule, sizing_inputs, config),
    )
    result.value_after = portfolio.value(prices)
    result.pending_after = portfolio.pending
    return result


@dataclass
class SimulationResult:
    events: list[EventResult]
    costs: CostReport


def simulate(
    config: RunConfig,
    start: date,
    end: date,
    flows: Sequence[tuple[date, Decimal]],
    portfolio: Portfolio | None = None,
    market: MarketData | None = None,
) -> SimulationResult:
    """One event per flow row dated within ``[start, end]``, in order.

    Events whose prices are missing are skipped with a warning; their flow is
    carried forward as pending cash.
    """
    if end < start:
        raise DataError(f"empty date range {start}..{end}")
    portfolio = portfolio if portfolio is not None else load_holdings(config.holdings)
    market = market if market is not None else MarketData.from_files(config.prices)
    sizing_inputs = load_sizing_inputs(config.sizing)
    rng = random.Random(config.seed)
    events = []
    total = EMPTY_COSTS
    n = 0
    for day, flow in flows:
        if not start <= day <= end:
            continue
        try:
            result = run_event(config, day, flow, portfolio, market, n, sizing_inputs, rng)
        except (InsufficientDataError, DegenerateError) as exc:
            log.warning("event %d (%s) skipped: %s", n, day, exc)
            portfolio.pending += usd(flow)
            result = EventResult(n, day, usd(flow), None, {}, None, None, None, EMPTY_COSTS, skipped=str(exc),
                                 pending_after=portfolio.pending)
        events.append(result)
        total = total + result.costs
        n += 1
    return SimulationResult(events, total)
