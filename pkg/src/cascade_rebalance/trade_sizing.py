"""Minimum and maximum trading block sizes.

The minimum keeps gas near 0.1% of an order (gas fee times a multiplier,
floored by a USD constant). The maximum keeps market impact small relative
to daily volume and pool depth, capped by a USD constant.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .errors import BoundsConflictError, ParseError, UntradableError, ValidationError
from .money import divide, usd

log = logging.getLogger(__name__)

SIZING_COLUMNS = ("asset", "avg_gas_fees", "avg_daily_volume", "liquidity_pool_depth")


@dataclass(frozen=True)
class SizingInputs:
    asset_id: str
    avg_gas_fees: Decimal
    avg_daily_volume: Decimal
    liquidity_pool_depth: Decimal

    def __post_init__(self):
        for name in ("avg_gas_fees", "avg_daily_volume", "liquidity_pool_depth"):
            value = getattr(self, name)
            object.__setattr__(self, name, Decimal(value) if not isinstance(value, Decimal) else value)
            if getattr(self, name) < 0:
                raise ValidationError(f"{self.asset_id}: {name} must be non-negative")


@dataclass(frozen=True)
class SizingConfig:
    min_size_multiplier: Decimal = Decimal(1000)
    min_size_param: Decimal = Decimal(25000)
    max_size_divisor: Decimal = Decimal(1000)
    max_size_param: Decimal = Decimal(200000)

    def __post_init__(self):
        for name in ("min_size_multiplier", "min_size_param", "max_size_divisor", "max_size_param"):
            value = Decimal(str(getattr(self, name)))
            if not value > 0:
                raise ValidationError(f"{name} must be positive")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class TradeSizeBounds:
    asset_id: str
    min_size: Decimal
    max_size: Decimal

    def __post_init__(self):
        if not 0 < self.min_size <= self.max_size:
            raise BoundsConflictError(
                f"{self.asset_id}: min size {self.min_size} exceeds max size {self.max_size}"
                if self.min_size > 0 else f"{self.asset_id}: min size must be positive"
            )


def min_block_size(inputs: SizingInputs, config: SizingConfig = SizingConfig()) -> Decimal:
    return usd(max(inputs.avg_gas_fees * config.min_size_multiplier, config.min_size_param))


def max_block_size(inputs: SizingInputs, config: SizingConfig = SizingConfig()) -> Decimal:
    if inputs.avg_daily_volume <= 0 or inputs.liquidity_pool_depth <= 0:
        raise UntradableError(f"{inputs.asset_id}: zero daily volume or pool depth")
    return min(
        divide(inputs.avg_daily_volume, config.max_size_divisor),
        divide(inputs.liquidity_pool_depth, 2 * config.max_size_divisor),
        usd(config.max_size_param),
    )


def size_bounds(inputs: SizingInputs, config: SizingConfig = SizingConfig()) -> TradeSizeBounds:
    return TradeSizeBounds(inputs.asset_id, min_block_size(inputs, config), max_block_size(inputs, config))


def load_sizing_inputs(path: str | Path) -> dict[str, SizingInputs]:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in SIZING_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}", 1)
        reader.fieldnames = header
        for row in reader:
            line = reader.line_num
            asset = (row["asset"] or "").strip()
            if not asset:
                raise ParseError("missing asset", line)
            if asset in out:
                raise ValidationError(f"line {line}: duplicate asset {asset}")
            try:
                values = [Decimal(row[c].strip()) for c in SIZING_COLUMNS[1:]]
            except (InvalidOperation, AttributeError):
                raise ParseError("cannot parse sizing value", line) from None
            out[asset] = SizingInputs(asset, *values)
    return out


def bounds_for(
    inputs: dict[str, SizingInputs], config: SizingConfig = SizingConfig()
) -> tuple[dict[str, TradeSizeBounds], dict[str, str]]:
    """Size bounds for every asset, plus the excluded ones with a reason.

    Assets whose minimum exceeds their maximum, or that have no volume or
    depth, cannot be traded this event; they are reported, not clamped.
    """
    good, excluded = {}, {}
    for asset, item in inputs.items():
        try:
            good[asset] = size_bounds(item, config)
        except (BoundsConflictError, UntradableError) as exc:
            log.warning("excluding %s: %s", asset, exc)
            excluded[asset] = str(exc)
    return good, excluded
