"""Comma-separated report tables mirroring the weight, capacity and schedule layouts.

Every table has a fixed header; an empty portfolio yields header-only files.
Numbers are written with fixed formatting so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Sequence

from ..baseline import SimplePlan
from ..cascade import RebalancePlan, ScheduledOrder
from ..errors import ReportIOError
from ..money import ZERO, fmt
from ..weights import Scheme, WeightTable
from .engine import CostReport, EventResult, MechanismCost, SimulationResult

WEIGHT_COLUMNS = (
    "AssetName", "Volatility", "vvvFactor", "VVV", "Variance", "EqualWeight", "MinVarianceWeight",
    "SimpleParityWeight", "vvvWeight", "riskParityWeight", "riskParityWeight-2%", "riskParityWeight+2%",
    "minMaxWeight", "noShortWeight", "minWeightAlt", "minWeight", "idealWeight", "maxWeight", "trueMinWeight",
)

CASCADE_COLUMNS = (
    "AssetName",
    "minMaxActualNotionalDiff", "rebalanceDelta", "buyIndicator", "capRankCrudeDec", "capRankCrudeInc",
    "capacityRank", "rawCapacityAlreadyFilled", "capacityAlreadyFilled", "rawCapacityInclusive",
    "capacityInclusive", "capacityIndicator", "capacityToFill", "AbsCapacityToFill", "minNumberOrders",
    "minBlockSizeInd", "additionalOrders", "Buy or Sell", "totalOrders", "orderSize", "orderSchedule",
    "amountDeployed", "cummTotalDeployed", "altCapacityToFill", "altMinNumberOfOrders", "rebalanceDeltaAdusted",
)

SIMPLE_COLUMNS = (
    "AssetName",
    "idealActualNotionalDiff", "absIdealActDiff", "newMinDeploy", "newIdealDeploy", "newMaxDeploy",
    "minBlockSize", "maxBlockSize", "minNumberOrders", "minBlockSizeInd", "additionalOrders", "Buy or Sell",
    "totalOrders", "orderSize", "orderSchedule", "amountDeployed", "cummTotalDeployed",
)

SCHEDULE_COLUMNS = ("sequence", "asset", "side", "amount", "delay_seconds")
COST_COLUMNS = ("mechanism", "orders", "gas", "slippage", "total")
SIMULATION_COLUMNS = (
    "event", "date", "flow", "skipped", "cascade_orders", "cascade_cost", "simple_orders", "simple_cost",
    "value_after", "pending_after",
)


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Decimal):
        return fmt(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) for v in row])
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from None
    return path


def weight_rows(table: WeightTable | None, stats: dict) -> list[list]:
    if table is None:
        return []
    cols = {s: v.as_dict() for s, v in table.vectors.items()}

    def w(scheme, asset):
        return cols[scheme][asset] if scheme in cols else None

    rows = []
    for a in table.asset_ids:
        s = stats[a]
        b = table.bounds[a]
        rows.append([
            a, s.volatility, s.vvv_factor, s.vvv_volatility, s.variance,
            w(Scheme.EQUAL, a), w(Scheme.MIN_VARIANCE, a), w(Scheme.SIMPLE_PARITY, a), w(Scheme.VVV, a),
            w(Scheme.RISK_PARITY, a), w(Scheme.RISK_PARITY_MINUS_2, a), w(Scheme.RISK_PARITY_PLUS_2, a),
            w(Scheme.CONSTRAINED_MIN_VARIANCE, a), w(Scheme.NO_SHORT, a),
            table.min_weight_alt[a], table.min_weight[a], b.ideal_w, b.max_w, table.true_min_weight[a],
        ])
    return rows


def cascade_rows(plan: RebalancePlan | None) -> list[list]:
    """One row per asset; ``orderSchedule``/``cummTotalDeployed`` follow execution order."""
    if plan is None:
        return []
    position, cumulative = {}, {}
    running = ZERO
    for r in sorted(plan.rows, key=lambda r: (r.buy_ind, r.cap_rank)):
        if r.total_orders:
            position[r.asset_id] = len(position) + 1
        running += r.amount_deployed
        cumulative[r.asset_id] = running
    rows = []
    for r in plan.rows:
        rows.append([
            r.asset_id, r.diff, r.rebalance_delta, r.buy_ind, r.rank_desc, r.rank_asc, r.cap_rank,
            r.raw_cap_filled, r.bound_cap_filled, r.raw_cap_filled + r.diff, r.cap_inclusive,
            1 if r.cap_to_fill != 0 else 0, r.cap_to_fill, abs(r.cap_to_fill), r.min_orders,
            1 if r.min_orders else -1, r.additional_orders, "Buy" if r.buy_ind else "Sell", r.total_orders,
            r.order_size, position.get(r.asset_id, 0), r.amount_deployed, cumulative[r.asset_id],
            r.alt_cap_to_fill, r.alt_min_orders, r.rebalance_delta_adjusted,
        ])
    return rows


def simple_rows(plan: SimplePlan | None) -> list[list]:
    if plan is None:
        return []
    return [
        [
            r.asset_id, r.ideal_actual_diff, r.abs_diff, r.new_min_deploy, r.new_ideal_deploy, r.new_max_deploy,
            r.min_size, r.max_size, r.min_orders, r.min_block_size_ind, r.additional_orders,
            "Buy" if r.side == "BUY" else "Sell", r.total_orders, r.order_size, r.order_schedule,
            r.amount_deployed, r.cumulative_deployed,
        ]
        for r in plan.rows
    ]


def schedule_rows(schedule: Sequence[ScheduledOrder]) -> list[list]:
    return [[o.sequence, o.asset_id, o.side, o.amount, o.delay_seconds] for o in schedule]


def cost_rows(costs: CostReport) -> list[list]:
    def row(name: str, c: MechanismCost):
        return [name, c.orders, c.gas, c.slippage, c.total]

    return [row("cascade", costs.cascade), row("simple", costs.simple)]


def _summary(costs: CostReport, **extra) -> dict:
    def block(c: MechanismCost):
        return {"orders": c.orders, "gas": fmt(c.gas), "slippage": fmt(c.slippage), "total": fmt(c.total)}

    return {**extra, "costs": {"cascade": block(costs.cascade), "simple": block(costs.simple)}}


def write_json(path: Path, data: dict) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from None
    return path


def emit_weights(result: EventResult, out_dir: Path) -> Path:
    return write_csv(out_dir / "weights.csv", WEIGHT_COLUMNS, weight_rows(result.weights, result.stats))


def emit_event(result: EventResult, out_dir: Path, figures: bool = True) -> list[Path]:
    """Write every table for one event into ``out_dir``."""
    out_dir = Path(out_dir)
    paths = [
        emit_weights(result, out_dir),
        write_csv(out_dir / "cascade_plan.csv", CASCADE_COLUMNS, cascade_rows(result.plan)),
        write_csv(out_dir / "cascade_schedule.csv", SCHEDULE_COLUMNS,
                  schedule_rows(result.plan.schedule if result.plan else ())),
        write_csv(out_dir / "simple_plan.csv", SIMPLE_COLUMNS, simple_rows(result.simple)),
        write_csv(out_dir / "simple_schedule.csv", SCHEDULE_COLUMNS,
                  schedule_rows(result.simple.schedule if result.simple else ())),
        write_csv(out_dir / "costs.csv", COST_COLUMNS, cost_rows(result.costs)),
    ]
    plan = result.plan
    paths.append(write_json(out_dir / "summary.json", _summary(
        result.costs,
        date=result.date.isoformat(),
        event=result.event_index,
        flow=fmt(result.flow),
        budget=fmt(plan.budget) if plan else None,
        rebalance_delta_total=fmt(plan.rebalance_delta_total) if plan else None,
        min_size_delta_total=fmt(plan.min_size_delta_total) if plan else None,
        excluded=dict(sorted(result.excluded.items())),
        value_before=fmt(result.value_before),
        value_after=fmt(result.value_after),
        pending_after=fmt(result.pending_after),
        skipped=result.skipped,
        warnings=list(result.weights.warnings) if result.weights else [],
    )))
    if figures:
        from . import figures as figs

        paths += figs.event_figures(result, out_dir)
    return paths


def emit_simulation(sim: SimulationResult, out_dir: Path, figures: bool = True, per_event: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    rows = []
    for e in sim.events:
        rows.append([
            e.event_index, e.date.isoformat(), e.flow, e.skipped or "", e.costs.cascade.orders,
            e.costs.cascade.total, e.costs.simple.orders, e.costs.simple.total, e.value_after, e.pending_after,
        ])
    paths = [
        write_csv(out_dir / "events.csv", SIMULATION_COLUMNS, rows),
        write_csv(out_dir / "costs.csv", COST_COLUMNS, cost_rows(sim.costs)),
        write_json(out_dir / "summary.json", _summary(sim.costs, events=len(sim.events),
                                                       skipped=sum(1 for e in sim.events if e.skipped))),
    ]
    if per_event:
        for e in sim.events:
            paths += emit_event(e, out_dir / "events" / f"{e.event_index:04d}_{e.date.isoformat()}", figures=False)
    if figures:
        from . import figures as figs

        paths += figs.simulation_figures(sim, out_dir)
    return paths
