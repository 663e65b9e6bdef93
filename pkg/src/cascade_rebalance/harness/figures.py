"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..weights import Scheme  # noqa: E402

# PNG metadata carries no timestamp; dropping the version keeps files comparable
# across matplotlib upgrades too.
_META = {"Software": None}

_STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}

_SCHEMES = (
    (Scheme.EQUAL, "equal"),
    (Scheme.SIMPLE_PARITY, "simple parity"),
    (Scheme.RISK_PARITY, "risk parity"),
    (Scheme.MIN_VARIANCE, "min variance"),
    (Scheme.NO_SHORT, "no short"),
)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def weight_band_figure(table, path: Path) -> Path:
    ids = list(table.asset_ids)
    x = np.arange(len(ids))
    lo = np.array([table.bounds[a].min_w for a in ids])
    ideal = np.array([table.bounds[a].ideal_w for a in ids])
    hi = np.array([table.bounds[a].max_w for a in ids])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(max(5, 0.45 * len(ids) + 2), 3.6))
        ax.vlines(x, lo, hi, color="0.6", lw=6, label="band")
        ax.scatter(x, ideal, color="k", marker="_", s=200, zorder=3, label="ideal (VVV)")
        for i, (scheme, label) in enumerate(_SCHEMES):
            if scheme in table.vectors:
                ax.scatter(x + 0.12 * (i - 2), table.vectors[scheme].weights, s=10, label=label)
        ax.set_xticks(x, ids, rotation=60, ha="right")
        ax.set_ylabel("weight")
        ax.set_title("Weight bands and candidate schemes")
        ax.legend(fontsize=7, ncol=3)
        return _save(fig, path)


def deployment_figure(plan, simple, path: Path) -> Path:
    ids = [r.asset_id for r in plan.rows]
    x = np.arange(len(ids))
    cascade = np.array([float(r.amount_deployed) for r in plan.rows])
    naive = np.array([float(r.amount_deployed) for r in simple.rows])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(max(5, 0.45 * len(ids) + 2), 3.4))
        ax.bar(x - 0.2, cascade, 0.4, label=f"cascade ({len(plan.schedule)} orders)")
        ax.bar(x + 0.2, naive, 0.4, label=f"simple ({len(simple.schedule)} orders)")
        ax.axhline(0, color="0.3", lw=0.6)
        ax.set_xticks(x, ids, rotation=60, ha="right")
        ax.set_ylabel("USD deployed")
        ax.set_title("Amount deployed per asset")
        ax.legend(fontsize=7)
        return _save(fig, path)


def event_figures(result, out_dir: Path) -> list[Path]:
    out = []
    if result.weights is not None:
        out.append(weight_band_figure(result.weights, out_dir / "weights.png"))
    if result.plan is not None and result.simple is not None:
        out.append(deployment_figure(result.plan, result.simple, out_dir / "deployed.png"))
    return out


def simulation_figures(sim, out_dir: Path) -> list[Path]:
    if not sim.events:
        return []
    n = np.arange(len(sim.events))
    cascade = np.cumsum([float(e.costs.cascade.total) for e in sim.events])
    naive = np.cumsum([float(e.costs.simple.total) for e in sim.events])
    orders_c = np.cumsum([e.costs.cascade.orders for e in sim.events])
    orders_s = np.cumsum([e.costs.simple.orders for e in sim.events])
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
        ax1.plot(n, cascade, label="cascade")
        ax1.plot(n, naive, label="simple")
        ax1.set_xlabel("event")
        ax1.set_ylabel("cumulative cost (USD)")
        ax1.legend()
        ax2.plot(n, orders_c, label="cascade")
        ax2.plot(n, orders_s, label="simple")
        ax2.set_xlabel("event")
        ax2.set_ylabel("cumulative orders")
        fig.suptitle("Cascade vs simple rebalancing")
        return [_save(fig, out_dir / "costs.png")]
