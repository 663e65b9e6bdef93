from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_rebalance.errors import BoundsConflictError, ParseError, UntradableError, ValidationError
from cascade_rebalance.trade_sizing import (
    SizingConfig, SizingInputs, bounds_for, load_sizing_inputs, max_block_size, min_block_size, size_bounds,
)

D = Decimal


def inputs(gas=25, volume=300_000_000, depth=100_000_000, asset="ETH"):
    return SizingInputs(asset, D(gas), D(volume), D(depth))


@pytest.mark.parametrize("gas,expected", [(25, 25000), (50, 50000), (0, 25000)])
def test_min_block_size(gas, expected):
    assert min_block_size(inputs(gas=gas)) == D(expected)


def test_max_block_size_depth_binds():
    assert max_block_size(inputs()) == D(50000)


def test_max_block_size_cap_binds():
    assert max_block_size(inputs(volume=10**9, depth=10**9)) == D(200000)


@pytest.mark.parametrize("volume,depth", [(10**8, 0), (0, 10**8)])
def test_no_liquidity_is_untradable(volume, depth):
    with pytest.raises(UntradableError):
        max_block_size(inputs(volume=volume, depth=depth))


def test_size_bounds_defaults():
    b = size_bounds(inputs())
    assert (b.min_size, b.max_size) == (D(25000), D(50000))
    generous = size_bounds(inputs(gas=10, volume=10**10, depth=10**10))
    assert (generous.min_size, generous.max_size) == (D(25000), D(200000))


def test_size_bounds_conflict():
    with pytest.raises(BoundsConflictError):
        size_bounds(inputs(volume=20_000_000))


def test_negative_input_rejected():
    with pytest.raises(ValidationError):
        inputs(gas=-1)


def test_bounds_for_reports_exclusions():
    good, excluded = bounds_for({"A": inputs(asset="A"), "B": inputs(volume=20_000_000, asset="B")})
    assert set(good) == {"A"}
    assert "B" in excluded


def test_custom_config():
    cfg = SizingConfig(min_size_multiplier=D(500), min_size_param=D(1000), max_size_param=D(30000))
    b = size_bounds(inputs(gas=4), cfg)
    assert (b.min_size, b.max_size) == (D(2000), D(30000))


def test_load_sizing_inputs(tmp_path):
    p = tmp_path / "sizing.csv"
    p.write_text("asset,avg_gas_fees,avg_daily_volume,liquidity_pool_depth\nETH,25,300000000,100000000\n")
    loaded = load_sizing_inputs(p)
    assert loaded["ETH"].liquidity_pool_depth == D(100_000_000)


def test_load_sizing_inputs_bad_row(tmp_path):
    p = tmp_path / "sizing.csv"
    p.write_text("asset,avg_gas_fees,avg_daily_volume,liquidity_pool_depth\nETH,x,1,1\n")
    with pytest.raises(ParseError, match="line 2"):
        load_sizing_inputs(p)


money = st.decimals(min_value=0, max_value=10**10, places=2)


@given(money, money)
def test_min_size_monotone_in_gas(a, b):
    lo, hi = sorted((a, b))
    assert min_block_size(inputs(gas=lo)) <= min_block_size(inputs(gas=hi))


@given(money, money, money, money)
def test_max_size_monotone_in_volume_and_depth(v1, v2, d1, d2):
    v1, v2 = sorted((v1 + 1, v2 + 1))
    d1, d2 = sorted((d1 + 1, d2 + 1))
    assert max_block_size(inputs(volume=v1, depth=d1)) <= max_block_size(inputs(volume=v2, depth=d2))


@given(st.decimals(min_value=1, max_value=10**6, places=0), st.decimals(min_value=1, max_value=10**6, places=0))
def test_max_size_monotone_in_cap(c1, c2):
    lo, hi = sorted((c1, c2))
    big = inputs(volume=10**12, depth=10**12)
    assert max_block_size(big, SizingConfig(max_size_param=lo)) <= max_block_size(big, SizingConfig(max_size_param=hi))


@given(st.decimals(min_value=0, max_value=25, places=6))
def test_floor_regime(gas):
    assert min_block_size(inputs(gas=gas)) == D(25000)
