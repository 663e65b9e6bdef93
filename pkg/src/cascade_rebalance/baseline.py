"""Simple rebalancing: every asset trades straight to its ideal notional.

No bands and no budget waterfall, just the same block-size rules. This is the
yardstick the cascade is compared against.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Mapping

from .cascade import (
    BUY, DEFAULT_DELAY_SECONDS, SELL, EventContext, OrderSizing, ScheduledOrder, compute_capacities,
    size_orders,
)
from .money import ZERO, scale
from .trade_sizing import TradeSizeBounds
from .weights import WeightBounds


@dataclass(frozen=True)
class SimplePlanRow:
    asset_id: str
    ideal_actual_diff: Decimal
    new_min_deploy: Decimal
    new_ideal_deploy: Decimal
    new_max_deploy: Decimal
    min_size: Decimal
    max_size: Decimal
    sizing: OrderSizing
    order_schedule: int
    cumulative_deployed: Decimal

    @property
    def abs_diff(self) -> Decimal:
        return abs(self.ideal_actual_diff)

    @property
    def min_orders(self) -> int:
        return self.sizing.min_orders

    @property
    def min_block_size_ind(self) -> int:
        return 1 if self.sizing.min_orders else -1

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
        return BUY if self.ideal_actual_diff >= 0 else SELL


@dataclass(frozen=True)
class SimplePlan:
    context: EventContext
    rows: tuple[SimplePlanRow, ...]
    schedule: tuple[ScheduledOrder, ...]

    @property
    def deployed(self) -> dict[str, Decimal]:
        return {r.asset_id: r.amount_deployed for r in self.rows}


def simple_plan(
    ctx: EventContext,
    bounds: Mapping[str, WeightBounds],
    sizes: Mapping[str, TradeSizeBounds],
    delay_seconds: float = DEFAULT_DELAY_SECONDS,
) -> SimplePlan:
    caps = compute_capacities(ctx, bounds)
    ids = ctx.asset_ids
    diffs = []
    for h, current, cap in zip(ctx.holdings, ctx.current_amounts, caps):
        diffs.append(-current if h.asset_id in ctx.full_exit else cap.ideal_new - current)
    sizings = [size_orders(d, sizes[a]) for d, a in zip(diffs, ids)]

    # sells first (largest first), then buys (largest first)
    order = sorted(range(ctx.k), key=lambda i: (diffs[i] >= 0, -abs(diffs[i]), i))
    position = {}
    cumulative = {}
    running = ZERO
    schedule = []
    for i in order:
        s = sizings[i]
        if s.amounts:
            position[i] = len(position) + 1
        running += s.deployed
        cumulative[i] = running
        side = BUY if diffs[i] >= 0 else SELL
        for amount in s.amounts:
            schedule.append(ScheduledOrder(len(schedule) + 1, ids[i], side, amount, delay_seconds))

    rows = []
    for i, h in enumerate(ctx.holdings):
        b = bounds[h.asset_id]
        rows.append(SimplePlanRow(
            asset_id=h.asset_id,
            ideal_actual_diff=diffs[i],
            new_min_deploy=scale(ctx.flow, b.min_w),
            new_ideal_deploy=scale(ctx.flow, b.ideal_w),
            new_max_deploy=scale(ctx.flow, b.max_w),
            min_size=sizes[h.asset_id].min_size,
            max_size=sizes[h.asset_id].max_size,
            sizing=sizings[i],
            order_schedule=position.get(i, 0),
            cumulative_deployed=cumulative[i],
        ))
    return SimplePlan(ctx, tuple(rows), tuple(schedule))
