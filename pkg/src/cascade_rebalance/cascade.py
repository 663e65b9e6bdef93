"""Cascading waterfall round robin rebalancing.

Given current holdings, a net flow and per-asset weight bands, each asset's
capacity is the gap to the top of its band (net deposits) or the bottom of it
(net withdrawals). Assets are ranked sells first, largest first, then buys,
largest first; the flow is poured down that ranking so each asset takes up to
its capacity and the remainder cascades to the next one. Capacities are
finally cut into orders no smaller than the minimum block size and no larger
than the maximum.

All notionals are quantized ``Decimal`` USD amounts (see :mod:`.money`).
"""

from __future__ import annotations

import gc
from dataclasses import dataclass, field, replace
from decimal import Decimal
from itertools import repeat
from typing import Callable, Mapping, NamedTuple, Sequence

from .errors import CoverageError, InfeasibleError, ReconciliationError, ValidationError
from .money import ZERO, divide, scale, split_evenly, usd, wide_multiply
from .trade_sizing import TradeSizeBounds
from .weights import WeightBounds

BUY = "BUY"
SELL = "SELL"
DEFAULT_DELAY_SECONDS = 5.0


@dataclass(frozen=True, slots=True)
class Holding:
    asset_id: str
    quantity: Decimal
    price: Decimal

    def __post_init__(self):
        if self.quantity < 0:
            raise ValidationError(f"{self.asset_id}: negative quantity")
        if not self.price > 0:
            raise ValidationError(f"{self.asset_id}: price must be positive")

    @property
    def current_amount(self) -> Decimal:
        return usd(wide_multiply(self.quantity, self.price))


@dataclass(frozen=True)
class EventContext:
    holdings: tuple[Holding, ...]
    flow: Decimal
    full_exit: frozenset[str] = frozenset()
    event_index: int = 0
    current_amounts: tuple[Decimal, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "current_amounts", tuple(h.current_amount for h in self.holdings))
        ids = self.asset_ids
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate asset in holdings")
        if self.flow < -self.current_total:
            raise InfeasibleError(
                f"withdrawal {-self.flow} exceeds portfolio value {self.current_total}"
            )

    @property
    def asset_ids(self) -> tuple[str, ...]:
        return tuple(h.asset_id for h in self.holdings)

    @property
    def k(self) -> int:
        return len(self.holdings)

    @property
    def current_total(self) -> Decimal:
        return sum(self.current_amounts, ZERO)

    @property
    def deposit_ind(self) -> int:
        return 1 if self.flow >= 0 else 0

    @property
    def withdraw_ind(self) -> int:
        return 1 - self.deposit_ind

    @property
    def deposit(self) -> bool:
        return self.flow >= 0


def prepare_event(
    holdings: Sequence[Holding],
    flow,
    full_exit: Sequence[str] = (),
    event_index: int = 0,
) -> EventContext:
    """Snapshot one rebalancing event; a flow of exactly 0 counts as a deposit."""
    return EventContext(tuple(holdings), usd(flow), frozenset(full_exit), event_index)


@dataclass(frozen=True, slots=True)
class Capacity:
    min_new: Decimal
    ideal_new: Decimal
    max_new: Decimal
    diff: Decimal


def compute_capacities(ctx: EventContext, bounds: Mapping[str, WeightBounds]) -> list[Capacity]:
    """New min/ideal/max notionals and the signed gap to the relevant band edge."""
    missing = [a for a in ctx.asset_ids if a not in bounds]
    if missing:
        raise CoverageError(f"no weight bounds for {missing}")
    new_total = ctx.current_total + ctx.flow
    out = []
    for h, current in zip(ctx.holdings, ctx.current_amounts):
        b = bounds[h.asset_id]
        lo, hi = scale(new_total, b.min_w), scale(new_total, b.max_w)
        min_new, max_new = min(lo, hi), max(lo, hi)
        ideal_new = scale(new_total, b.ideal_w)
        if h.asset_id in ctx.full_exit:
            diff = -current
        elif ctx.deposit:
            diff = max_new - current
        else:
            diff = min_new - current
        out.append(Capacity(min_new, ideal_new, max_new, diff))
    return out


@dataclass(frozen=True)
class Deltas:
    rebalance_delta: tuple[Decimal, ...]
    min_size_delta: tuple[Decimal, ...]
    buy_ind: tuple[int, ...]
    rebalance_delta_total: Decimal
    min_size_delta_total: Decimal
    total_buy_orders: int
    total_sell_orders: int


def compute_deltas(
    ctx: EventContext,
    caps: Sequence[Capacity],
    sizes: Mapping[str, TradeSizeBounds],
) -> Deltas:
    """Forced counter-flow trades, the sub-minimum part of them, and buy flags."""
    rebalance, small, buy = [], [], []
    for h, current, cap in zip(ctx.holdings, ctx.current_amounts, caps):
        if ctx.deposit:
            delta = min(cap.max_new - current, ZERO)
        else:
            delta = max(cap.min_new - current, ZERO)
        rebalance.append(delta)
        small.append(delta if abs(delta) < sizes[h.asset_id].min_size else ZERO)
        buy.append(1 if cap.diff >= 0 else 0)
    n_buy = sum(buy)
    return Deltas(
        tuple(rebalance), tuple(small), tuple(buy),
        sum(rebalance, ZERO), sum(small, ZERO), n_buy, len(buy) - n_buy,
    )


@dataclass(frozen=True)
class Ranking:
    max_to_min: tuple[int, ...]
    min_to_max: tuple[int, ...]
    cap_rank: tuple[int, ...]


def rank_capacities(diffs: Sequence[Decimal]) -> Ranking:
    """Sells (most negative first), then buys (largest first), ties by index."""
    k = len(diffs)
    desc = [0] * k
    asc = [0] * k
    for pos, i in enumerate(sorted(range(k), key=lambda i: (-diffs[i], i)), 1):
        desc[i] = pos
    for pos, i in enumerate(sorted(range(k), key=lambda i: (diffs[i], i)), 1):
        asc[i] = pos
    n_sell = sum(1 for d in diffs if d < 0)
    cap = [a + (d - a + n_sell if diff >= 0 else 0) for a, d, diff in zip(asc, desc, diffs)]
    return Ranking(tuple(desc), tuple(asc), tuple(cap))


def fill_budget(deposit: bool, flow: Decimal, rebalance_delta_total: Decimal, min_size_delta_total: Decimal) -> Decimal:
    """Amount poured down the ranking.

    Deposits add the sub-minimum forced sells (which will not trade); withdrawals
    subtract every forced buy.
    """
    return flow + min_size_delta_total if deposit else flow - rebalance_delta_total


def raw_capacity_filled(diffs: Sequence[Decimal], ranks: Sequence[int]) -> list[Decimal]:
    """Sum of the capacities of every asset ranked strictly before each asset."""
    out = [ZERO] * len(diffs)
    running = ZERO
    for i in sorted(range(len(diffs)), key=ranks.__getitem__):
        out[i] = running
        running += diffs[i]
    return out


def capacity_to_fill(diffs: Sequence[Decimal], ranks: Sequence[int], budget: Decimal, deposit: bool) -> list[Decimal]:
    raw = raw_capacity_filled(diffs, ranks)
    if deposit:
        return [min(d, budget - min(budget, r)) for d, r in zip(diffs, raw)]
    return [max(d, budget - max(budget, r)) for d, r in zip(diffs, raw)]


@dataclass(frozen=True)
class AltFill:
    raw_filled: tuple[Decimal, ...]
    bound_filled: tuple[Decimal, ...]
    inclusive: tuple[Decimal, ...]
    cap_to_fill: tuple[Decimal, ...]


def capacity_to_fill_alt(diffs: Sequence[Decimal], ranks: Sequence[int], budget: Decimal, deposit: bool) -> AltFill:
    """Multi-step form: bounded capacity already filled, then inclusive of the asset."""
    raw = raw_capacity_filled(diffs, ranks)
    clip = min if deposit else max
    bound = [clip(budget, r) for r in raw]
    inclusive = [clip(budget, d + b) for d, b in zip(diffs, bound)]
    cap = [clip(d, inc - b) for d, inc, b in zip(diffs, inclusive, bound)]
    return AltFill(tuple(raw), tuple(bound), tuple(inclusive), tuple(cap))


def sequential_fill_oracle(diffs: Sequence[Decimal], ranks: Sequence[int], budget: Decimal, deposit: bool) -> list[Decimal]:
    """Greedy reference loop: walk the ranking, hand out what is left."""
    out = [ZERO] * len(diffs)
    remaining = budget
    for i in sorted(range(len(diffs)), key=lambda i: ranks[i]):
        if deposit:
            take = min(diffs[i], max(remaining, ZERO))
        else:
            take = max(diffs[i], min(remaining, ZERO))
        out[i] = take
        remaining -= take
    return out


@dataclass(frozen=True, slots=True)
class OrderSizing:
    min_orders: int
    additional_orders: int
    total_orders: int
    order_size: Decimal
    amounts: tuple[Decimal, ...]

    @property
    def deployed(self) -> Decimal:
        return sum(self.amounts, ZERO)


def size_orders(cap_to_fill: Decimal, sizes: TradeSizeBounds) -> OrderSizing:
    """Cut a capacity into orders.

    One order if the capacity reaches the minimum block size, plus one per
    whole maximum block it contains. ``order_size`` is the even split rounded
    half-even to the quantum; the individual ``amounts`` differ by at most one
    quantum and sum to the capacity exactly.
    """
    magnitude = abs(cap_to_fill)
    min_orders = 1 if magnitude >= sizes.min_size else 0
    additional = int(magnitude // sizes.max_size)
    total = min_orders + additional
    if not min_orders:
        return OrderSizing(0, additional, total, ZERO, ())
    order_size = divide(cap_to_fill, additional + 1)
    return OrderSizing(min_orders, additional, total, order_size, tuple(split_evenly(cap_to_fill, total)))


@dataclass(frozen=True)
class AssetPlanRow:
    asset_id: str
    current: Decimal
    min_new: Decimal
    ideal_new: Decimal
    max_new: Decimal
    diff: Decimal
    rebalance_delta: Decimal
    min_size_delta: Decimal
    buy_ind: int
    rank_desc: int
    rank_asc: int
    cap_rank: int
    raw_cap_filled: Decimal
    bound_cap_filled: Decimal
    cap_inclusive: Decimal
    cap_to_fill: Decimal
    alt_cap_to_fill: Decimal
    min_size: Decimal
    max_size: Decimal
    sizing: OrderSizing

    @property
    def min_orders(self) -> int:
        return self.sizing.min_orders

    @property
    def additional_orders(self) -> int:
        return self.sizing.additional_orders

    @property
    def total_orders(self) -> int:
        return self.sizing.total_orders

    @property
    def order_size(self) -> Decimal:
        return self.sizing.order_size

    @property
    def amount_deployed(self) -> Decimal:
        return self.sizing.deployed

    @property
    def side(self) -> str:
        return BUY if self.buy_ind else SELL

    @property
    def alt_min_orders(self) -> int:
        return 1 if abs(self.alt_cap_to_fill) >= self.min_size else 0

    @property
    def rebalance_delta_adjusted(self) -> Decimal:
        return self.rebalance_delta if self.alt_min_orders else ZERO


class ScheduledOrder(NamedTuple):
    # a tuple keeps schedules of several hundred thousand orders cheap to build
    sequence: int
    asset_id: str
    side: str
    amount: Decimal
    delay_seconds: float


@dataclass(frozen=True)
class RebalancePlan:
    context: EventContext
    rows: tuple[AssetPlanRow, ...]
    rebalance_delta_total: Decimal
    min_size_delta_total: Decimal
    total_buy_orders: int
    total_sell_orders: int
    budget: Decimal
    schedule: tuple[ScheduledOrder, ...]

    def row(self, asset_id: str) -> AssetPlanRow:
        for r in self.rows:
            if r.asset_id == asset_id:
                return r
        raise KeyError(asset_id)

    @property
    def deployed(self) -> dict[str, Decimal]:
        return {r.asset_id: r.amount_deployed for r in self.rows}


Jitter = Callable[[str, list[Decimal]], list[Decimal]]


def build_schedule(
    rows: Sequence[AssetPlanRow],
    delay_seconds: float = DEFAULT_DELAY_SECONDS,
    jitter: Jitter | None = None,
    start: int = 1,
) -> tuple[ScheduledOrder, ...]:
    """Every sell order in rank order, then every buy order in rank order.

    ``jitter`` may reshape an asset's order amounts (same count, same sum);
    it is off unless supplied.
    """
    ordered = sorted(rows, key=lambda r: (r.buy_ind, r.cap_rank))
    # order tuples cannot form cycles; collector passes over a large heap
    # would otherwise dominate big schedules
    paused = gc.isenabled()
    gc.disable()
    try:
        return _orders(ordered, delay_seconds, jitter, start)
    finally:
        if paused:
            gc.enable()


def _orders(ordered, delay_seconds, jitter, start):
    out = []
    seq = start
    for r in ordered:
        amounts = list(r.sizing.amounts)
        if jitter is not None and amounts:
            reshaped = jitter(r.asset_id, amounts)
            if len(reshaped) != len(amounts) or sum(reshaped, ZERO) != sum(amounts, ZERO):
                raise ValueError("jitter must keep the order count and total")
            amounts = reshaped
        n = len(amounts)
        out.extend(map(ScheduledOrder, range(seq, seq + n), repeat(r.asset_id, n), repeat(r.side, n), amounts,
                       repeat(delay_seconds, n)))
        seq += n
    return tuple(out)


def _rows(ctx, caps, deltas, ranking, cap_fill, alt, sizes):
    rows = []
    for i, h in enumerate(ctx.holdings):
        s = sizes[h.asset_id]
        rows.append(AssetPlanRow(
            asset_id=h.asset_id,
            current=ctx.current_amounts[i],
            min_new=caps[i].min_new,
            ideal_new=caps[i].ideal_new,
            max_new=caps[i].max_new,
            diff=caps[i].diff,
            rebalance_delta=deltas.rebalance_delta[i],
            min_size_delta=deltas.min_size_delta[i],
            buy_ind=deltas.buy_ind[i],
            rank_desc=ranking.max_to_min[i],
            rank_asc=ranking.min_to_max[i],
            cap_rank=ranking.cap_rank[i],
            raw_cap_filled=alt.raw_filled[i],
            bound_cap_filled=alt.bound_filled[i],
            cap_inclusive=alt.inclusive[i],
            cap_to_fill=cap_fill[i],
            alt_cap_to_fill=alt.cap_to_fill[i],
            min_size=s.min_size,
            max_size=s.max_size,
            sizing=size_orders(cap_fill[i], s),
        ))
    return rows


def plan_cascade(
    ctx: EventContext,
    bounds: Mapping[str, WeightBounds],
    sizes: Mapping[str, TradeSizeBounds],
    delay_seconds: float = DEFAULT_DELAY_SECONDS,
    jitter: Jitter | None = None,
) -> RebalancePlan:
    """Run the whole mechanism for one event."""
    missing = [a for a in ctx.asset_ids if a not in sizes]
    if missing:
        raise CoverageError(f"no trade size bounds for {missing}")
    caps = compute_capacities(ctx, bounds)
    deltas = compute_deltas(ctx, caps, sizes)
    diffs = [c.diff for c in caps]
    ranking = rank_capacities(diffs)
    budget = fill_budget(ctx.deposit, ctx.flow, deltas.rebalance_delta_total, deltas.min_size_delta_total)
    cap_fill = capacity_to_fill(diffs, ranking.cap_rank, budget, ctx.deposit)
    alt = capacity_to_fill_alt(diffs, ranking.cap_rank, budget, ctx.deposit)
    rows = _rows(ctx, caps, deltas, ranking, cap_fill, alt, sizes)
    return RebalancePlan(
        context=ctx,
        rows=tuple(rows),
        rebalance_delta_total=deltas.rebalance_delta_total,
        min_size_delta_total=deltas.min_size_delta_total,
        total_buy_orders=deltas.total_buy_orders,
        total_sell_orders=deltas.total_sell_orders,
        budget=budget,
        schedule=build_schedule(rows, delay_seconds, jitter),
    )


@dataclass(frozen=True, slots=True)
class Fill:
    sequence: int
    asset_id: str
    placed: Decimal
    realized: Decimal

    @property
    def failed(self) -> bool:
        return self.realized == 0


@dataclass(frozen=True)
class FillReport:
    fills: tuple[Fill, ...]

    @property
    def shortfall(self) -> Decimal:
        """Cash not received relative to what the sells were placed for."""
        return sum((f.realized - f.placed for f in self.fills), ZERO)


def exact_fills(plan: RebalancePlan) -> FillReport:
    return FillReport(tuple(Fill(o.sequence, o.asset_id, o.amount, o.amount) for o in plan.schedule if o.side == SELL))


def adjust_after_sells(plan: RebalancePlan, fills: FillReport) -> RebalancePlan:
    """Re-plan the buy side once sell proceeds are known.

    The sub-minimum delta total absorbs the gap between placed and received
    sell value, the budget shrinks accordingly, and capacities are refilled for
    buy assets only. Sell rows and their schedule entries are left untouched.
    """
    sells = {o.sequence: o for o in plan.schedule if o.side == SELL}
    seen = set()
    for f in fills.fills:
        order = sells.get(f.sequence)
        if order is None or order.asset_id != f.asset_id:
            raise ReconciliationError(f"fill for unknown sell order {f.sequence} ({f.asset_id})")
        if f.placed != order.amount:
            raise ReconciliationError(f"order {f.sequence}: placed {f.placed} != scheduled {order.amount}")
        if f.sequence in seen:
            raise ReconciliationError(f"duplicate fill for order {f.sequence}")
        seen.add(f.sequence)
    if seen != set(sells):
        raise ReconciliationError(f"no fill reported for sell orders {sorted(set(sells) - seen)}")

    ctx = plan.context
    min_size_total = plan.min_size_delta_total - fills.shortfall
    budget = fill_budget(ctx.deposit, ctx.flow, plan.rebalance_delta_total, min_size_total)
    diffs = [r.diff for r in plan.rows]
    ranks = [r.cap_rank for r in plan.rows]
    cap_fill = capacity_to_fill(diffs, ranks, budget, ctx.deposit)
    alt = capacity_to_fill_alt(diffs, ranks, budget, ctx.deposit)
    rows = []
    for i, r in enumerate(plan.rows):
        if not r.buy_ind:
            rows.append(r)
            continue
        rows.append(replace(
            r,
            raw_cap_filled=alt.raw_filled[i],
            bound_cap_filled=alt.bound_filled[i],
            cap_inclusive=alt.inclusive[i],
            cap_to_fill=cap_fill[i],
            alt_cap_to_fill=alt.cap_to_fill[i],
            sizing=size_orders(cap_fill[i], TradeSizeBounds(r.asset_id, r.min_size, r.max_size)),
        ))
    sell_orders = tuple(o for o in plan.schedule if o.side == SELL)
    delay = plan.schedule[0].delay_seconds if plan.schedule else DEFAULT_DELAY_SECONDS
    buy_orders = build_schedule([r for r in rows if r.buy_ind], delay, start=len(sell_orders) + 1)
    return replace(plan, rows=tuple(rows), min_size_delta_total=min_size_total, budget=budget,
                   schedule=sell_orders + buy_orders)
