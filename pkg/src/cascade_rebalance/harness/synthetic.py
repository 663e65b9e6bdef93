"""Seeded synthetic market for demos and end-to-end tests."""

from __future__ import annotations

import csv
from datetime import date, timedelta
from decimal import Decimal
from pathlib import Path

import numpy as np
import yaml


def price_paths(n_assets: int, days: int, seed: int = 0, mean_revert: float = 0.0) -> np.ndarray:
    """``days x n_assets`` close prices from correlated log steps.

    ``mean_revert > 0`` pulls each log price back toward its start, which
    makes band crossings frequent.
    """
    rng = np.random.default_rng(seed)
    vols = rng.uniform(0.02, 0.08, n_assets)
    loadings = rng.uniform(0.2, 0.7, n_assets)
    market = rng.standard_normal(days)
    idio = rng.standard_normal((days, n_assets))
    steps = vols * (loadings * market[:, None] + np.sqrt(1 - loadings**2) * idio)
    start = np.log(rng.uniform(1, 500, n_assets))
    logp = np.empty((days, n_assets))
    logp[0] = start
    for t in range(1, days):
        logp[t] = logp[t - 1] + steps[t] - mean_revert * (logp[t - 1] - start)
    return np.exp(logp)


def write_market(
    out_dir: str | Path,
    n_assets: int = 6,
    days: int = 400,
    seed: int = 0,
    start: date = date(2023, 1, 1),
    mean_revert: float = 0.05,
    portfolio_usd: float = 2_000_000,
) -> Path:
    """Write prices, sizing inputs, holdings, a flow schedule and a config; return the config path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = price_paths(n_assets, days, seed, mean_revert)
    assets = [f"A{i:02d}" for i in range(n_assets)]
    rng = np.random.default_rng(seed + 1)

    with open(out / "prices.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "date", "open", "high", "low", "close"])
        for j, a in enumerate(assets):
            for t in range(days):
                c = f"{paths[t, j]:.6f}"
                o = f"{paths[t - 1, j] if t else paths[t, j]:.6f}"
                hi = f"{max(float(o), float(c)):.6f}"
                lo = f"{min(float(o), float(c)):.6f}"
                w.writerow([a, (start + timedelta(days=t)).isoformat(), o, hi, lo, c])

    with open(out / "sizing.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "avg_gas_fees", "avg_daily_volume", "liquidity_pool_depth"])
        for a in assets:
            w.writerow([a, f"{rng.uniform(2, 20):.2f}", f"{rng.uniform(5e7, 4e8):.0f}", f"{rng.uniform(6e7, 3e8):.0f}"])

    with open(out / "holdings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "quantity", "network"])
        for j, a in enumerate(assets):
            qty = Decimal(f"{portfolio_usd / n_assets / paths[days // 2, j]:.6f}")
            w.writerow([a, qty, "slow" if j % 3 == 0 else "fast"])

    with open(out / "flows.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "flow_usd"])
        for t in range(days // 2, days):
            w.writerow([(start + timedelta(days=t)).isoformat(), f"{rng.normal(0, 150_000):.2f}"])

    config = {
        "prices": "prices.csv",
        "sizing": "sizing.csv",
        "holdings": "holdings.csv",
        "output_dir": "reports",
        "networks": {"fast": {"interval_minutes": 240, "every": 1}, "slow": {"interval_minutes": 1440, "every": 6}},
        "seed": seed,
    }
    path = out / "config.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=True))
    return path
