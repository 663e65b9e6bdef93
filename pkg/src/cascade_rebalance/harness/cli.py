"""``cascade-rebalance`` command line.

Exit codes: 0 ok, 1 other rebalancing error, 2 usage, 3 config, 4 data,
5 solver, 6 infeasible, 7 reconciliation, 8 report I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import date
from decimal import Decimal, InvalidOperation
from pathlib import Path

from ..errors import ReportIOError, RebalanceError
from .config import load_config
from .engine import load_flows, run_event, simulate
from .reports import emit_event, emit_simulation, emit_weights


def _date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text}") from None


def _usd(text: str) -> Decimal:
    try:
        return Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascade-rebalance", description="Cascading waterfall rebalancing engine")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("rebalance", help="plan a single event")
    common(p)
    p.add_argument("--date", required=True, type=_date)
    p.add_argument("--flow", required=True, type=_usd, help="signed USD; negative withdraws")

    p = sub.add_parser("simulate", help="replay a flow schedule")
    common(p)
    p.add_argument("--from", dest="start", required=True, type=_date)
    p.add_argument("--to", dest="end", required=True, type=_date)
    p.add_argument("--flows", required=True, type=Path, help="CSV with date,flow_usd")
    p.add_argument("--per-event", action="store_true", help="also write every event's tables")

    p = sub.add_parser("weights", help="weight table only")
    common(p)
    p.add_argument("--date", required=True, type=_date)

    p = sub.add_parser("demo", help="generate a synthetic market and simulate it")
    p.add_argument("--dir", type=Path, default=Path("demo"))
    p.add_argument("--assets", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-figures", action="store_true")
    return parser


def _run(args) -> int:
    if args.command == "demo":
        from .synthetic import write_market

        config_path = write_market(args.dir, n_assets=args.assets, seed=args.seed)
        cfg = load_config(config_path)
        flows = load_flows(args.dir / "flows.csv")
        sim = simulate(cfg, flows[0][0], flows[-1][0], flows)
        emit_simulation(sim, cfg.output_dir, figures=not args.no_figures)
        c = sim.costs
        print(f"{len(sim.events)} events; cascade {c.cascade.orders} orders ${c.cascade.total}; "
              f"simple {c.simple.orders} orders ${c.simple.total}; reports in {cfg.output_dir}")
        return 0

    cfg = load_config(args.config)
    out = args.out or cfg.output_dir
    figures = cfg.figures and not args.no_figures
    if args.command == "rebalance":
        result = run_event(cfg, args.date, args.flow)
        emit_event(result, out, figures=figures)
        plan = result.plan
        n = len(plan.schedule) if plan else 0
        print(f"{args.date}: {n} cascade orders, {len(result.simple.schedule) if result.simple else 0} simple; "
              f"reports in {out}")
    elif args.command == "weights":
        result = run_event(cfg, args.date, 0)
        emit_weights(result, Path(out))
        if figures and result.weights is not None:
            from .figures import weight_band_figure

            weight_band_figure(result.weights, Path(out) / "weights.png")
        print(f"weights for {len(result.weights.asset_ids) if result.weights else 0} assets in {out}")
    else:
        sim = simulate(cfg, args.start, args.end, load_flows(args.flows))
        emit_simulation(sim, out, figures=figures, per_event=args.per_event)
        c = sim.costs
        print(f"{len(sim.events)} events; cascade {c.cascade.orders} orders ${c.cascade.total}; "
              f"simple {c.simple.orders} orders ${c.simple.total}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except RebalanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ReportIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
