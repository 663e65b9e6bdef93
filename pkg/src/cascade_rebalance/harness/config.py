"""Run configuration (YAML).

Minimal file::

    prices: prices.csv
    sizing: sizing.csv
    holdings: holdings.csv

Everything else has defaults. Relative paths resolve against the config
file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any

import yaml

from ..errors import ConfigError, ValidationError
from ..market_data import DEFAULT_WINDOW, MIN_HISTORY
from ..trade_sizing import SizingConfig
from ..weights import WeightConfig

DEFAULT_NETWORK = "default"


@dataclass(frozen=True)
class NetworkConfig:
    name: str
    interval_minutes: float = 1440.0
    every: int = 1

    def participates(self, event_index: int) -> bool:
        return event_index % self.every == 0


@dataclass(frozen=True)
class CostModel:
    gas_per_order: Decimal | None = None
    impact_divisor: Decimal = Decimal(1)


@dataclass(frozen=True)
class RunConfig:
    prices: tuple[Path, ...]
    sizing: Path
    holdings: Path
    output_dir: Path = Path("reports")
    window: int = DEFAULT_WINDOW
    min_history: int = MIN_HISTORY
    weights: WeightConfig = WeightConfig()
    sizing_params: SizingConfig = SizingConfig()
    networks: dict[str, NetworkConfig] = field(default_factory=lambda: {DEFAULT_NETWORK: NetworkConfig(DEFAULT_NETWORK)})
    cost: CostModel = CostModel()
    full_exit: frozenset[str] = frozenset()
    delay_seconds: float = 5.0
    fill_noise: float = 0.0
    seed: int = 0
    figures: bool = True


_TOP = {
    "prices", "sizing", "holdings", "output_dir", "window", "min_history", "theta", "weights",
    "sizing_params", "networks", "cost", "full_exit", "delay_seconds", "fill_noise", "seed", "figures",
}
_WEIGHTS = {"min_asset_weight", "max_asset_weight", "rp_perturbation", "rp_tolerance", "rp_max_iter", "rp_damping"}
_SIZING = {"min_size_multiplier", "min_size_param", "max_size_divisor", "max_size_param"}
_NETWORK = {"interval_minutes", "every"}
_COST = {"gas_per_order", "impact_divisor"}


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _mapping(section: str, value: Any) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{section} must be a mapping")
    return value


def _positive_decimal(section: str, value) -> Decimal:
    try:
        d = Decimal(str(value))
    except Exception:
        raise ConfigError(f"{section}: not a number: {value!r}") from None
    if not d > 0:
        raise ConfigError(f"{section} must be positive")
    return d


def parse_config(data: dict, base: Path = Path(".")) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    _check_keys("config", data, _TOP)
    for required in ("prices", "sizing", "holdings"):
        if required not in data:
            raise ConfigError(f"missing required key: {required}")

    def path(p) -> Path:
        p = Path(str(p))
        return p if p.is_absolute() else base / p

    prices = data["prices"]
    prices = tuple(path(p) for p in (prices if isinstance(prices, list) else [prices]))

    weights_raw = _mapping("weights", data.get("weights"))
    _check_keys("weights", weights_raw, _WEIGHTS)
    if "theta" in data:
        weights_raw = {**weights_raw, "theta": data["theta"]}
    try:
        weights = WeightConfig(**weights_raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"weights: {exc}") from None

    sizing_raw = _mapping("sizing_params", data.get("sizing_params"))
    _check_keys("sizing_params", sizing_raw, _SIZING)
    try:
        sizing_params = SizingConfig(**{k: Decimal(str(v)) for k, v in sizing_raw.items()})
    except (ValidationError, ArithmeticError) as exc:
        raise ConfigError(f"sizing_params: {exc}") from None

    networks = {}
    for name, raw in _mapping("networks", data.get("networks")).items():
        raw = _mapping(f"networks.{name}", raw)
        _check_keys(f"networks.{name}", raw, _NETWORK)
        interval = float(raw.get("interval_minutes", 1440))
        every = raw.get("every", 1)
        if not interval > 0:
            raise ConfigError(f"networks.{name}.interval_minutes must be positive")
        if not isinstance(every, int) or every < 1:
            raise ConfigError(f"networks.{name}.every must be an integer >= 1")
        networks[str(name)] = NetworkConfig(str(name), interval, every)
    networks.setdefault(DEFAULT_NETWORK, NetworkConfig(DEFAULT_NETWORK))

    cost_raw = _mapping("cost", data.get("cost"))
    _check_keys("cost", cost_raw, _COST)
    gas = cost_raw.get("gas_per_order")
    cost = CostModel(
        gas_per_order=None if gas is None else Decimal(str(gas)),
        impact_divisor=_positive_decimal("cost.impact_divisor", cost_raw.get("impact_divisor", 1)),
    )
    if cost.gas_per_order is not None and cost.gas_per_order < 0:
        raise ConfigError("cost.gas_per_order must be non-negative")

    window = data.get("window", DEFAULT_WINDOW)
    min_history = data.get("min_history", MIN_HISTORY)
    if not isinstance(window, int) or window < 2:
        raise ConfigError("window must be an integer >= 2")
    if not isinstance(min_history, int) or not 2 <= min_history:
        raise ConfigError("min_history must be an integer >= 2")
    delay = float(data.get("delay_seconds", 5.0))
    noise = float(data.get("fill_noise", 0.0))
    if delay < 0:
        raise ConfigError("delay_seconds must be non-negative")
    if not 0 <= noise < 1:
        raise ConfigError("fill_noise must be in [0, 1)")

    return RunConfig(
        prices=prices,
        sizing=path(data["sizing"]),
        holdings=path(data["holdings"]),
        output_dir=path(data.get("output_dir", "reports")),
        window=window,
        min_history=min_history,
        weights=weights,
        sizing_params=sizing_params,
        networks=networks,
        cost=cost,
        full_exit=frozenset(data.get("full_exit") or ()),
        delay_seconds=delay,
        fill_noise=noise,
        seed=int(data.get("seed", 0)),
        figures=bool(data.get("figures", True)),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return parse_config(data, path.parent)


def event_index(elapsed_minutes: float, interval_minutes: float) -> int:
    """Number of rebalancing events since inception, ``floor(t / T)``."""
    if interval_minutes <= 0:
        raise ValueError("interval must be positive")
    return int(elapsed_minutes // interval_minutes)


def participating_assets(event_index: int, config: RunConfig, asset_networks: dict[str, str]) -> list[str]:
    """Assets whose network rebalances at event ``event_index``.

    A network with ``every = m`` joins events ``0, m, 2m, ...``; ``every = 1``
    networks join all of them.
    """
    out = []
    for asset, net in asset_networks.items():
        if net not in config.networks:
            raise ConfigError(f"asset {asset} is on unconfigured network {net!r}")
        if config.networks[net].participates(event_index):
            out.append(asset)
    return out
