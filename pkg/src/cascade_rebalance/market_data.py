"""Price ingestion and the risk statistics that feed the weight engine.

Returns are continuously compounded close-to-close returns. Volatility is the
sample standard deviation (``T - 1`` normalization) over a trailing window;
assets with fewer than ``window`` returns use whatever history they have, as
long as it reaches ``min_history``.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from decimal import Context, Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientDataError, ParseError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 90
MIN_HISTORY = 30

PRICE_COLUMNS = ("date", "open", "high", "low", "close")

# Wide enough that (c * P_t) / (c * P_{t-1}) rounds to the same value as
# P_t / P_{t-1}; log returns are then exactly scale invariant.
_RATIO_CTX = Context(prec=60)


@dataclass(frozen=True)
class PricePoint:
    date: date
    open: Decimal
    high: Decimal
    low: Decimal
    close: Decimal

    def __post_init__(self):
        for name in ("open", "high", "low", "close"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{self.date}: {name} price must be positive")
        if not (self.low <= min(self.open, self.close) and max(self.open, self.close) <= self.high):
            raise ValidationError(f"{self.date}: prices violate low <= open/close <= high")


@dataclass(frozen=True)
class PriceSeries:
    asset_id: str
    points: tuple[PricePoint, ...]

    def __post_init__(self):
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.date <= prev.date:
                raise ValidationError(f"{self.asset_id}: dates must be strictly increasing ({cur.date})")

    def __len__(self):
        return len(self.points)

    @property
    def dates(self) -> list[date]:
        return [p.date for p in self.points]

    def close_on(self, day: date) -> Decimal | None:
        for p in reversed(self.points):
            if p.date == day:
                return p.close
            if p.date < day:
                return None
        return None

    def until(self, day: date) -> "PriceSeries":
        """History up to and including ``day``."""
        return PriceSeries(self.asset_id, tuple(p for p in self.points if p.date <= day))


@dataclass(frozen=True)
class ReturnSeries:
    asset_id: str
    dates: tuple[date, ...]
    values: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.dates)

    def until(self, day: date) -> "ReturnSeries":
        n = sum(1 for d in self.dates if d <= day)
        return ReturnSeries(self.asset_id, self.dates[:n], self.values[:n])


@dataclass(frozen=True)
class RiskStats:
    asset_id: str
    date: date
    window_length: int
    mean_return: float
    variance: float
    volatility: float
    vvv_factor: float = 0.0
    vvv_volatility: float = float("nan")
    degenerate_vvv: bool = False


@dataclass(frozen=True)
class CovarianceMatrix:
    asset_ids: tuple[str, ...]
    entries: np.ndarray

    @property
    def k(self) -> int:
        return len(self.asset_ids)


def _decimal(text: str, lineno: int, column: str) -> Decimal:
    try:
        return Decimal(text.strip())
    except (InvalidOperation, AttributeError):
        raise ParseError(f"cannot parse {column} value {text!r}", lineno) from None


def _date(text: str, lineno: int) -> date:
    try:
        return date.fromisoformat(text.strip())
    except (ValueError, AttributeError):
        raise ParseError(f"cannot parse date {text!r}", lineno) from None


def _build_series(asset_id: str, rows: list[tuple[int, PricePoint]]) -> PriceSeries:
    rows.sort(key=lambda r: r[1].date)
    seen: dict[date, int] = {}
    for lineno, p in rows:
        if p.date in seen:
            raise ValidationError(f"{asset_id}: duplicate date {p.date} (lines {seen[p.date]} and {lineno})")
        seen[p.date] = lineno
    return PriceSeries(asset_id, tuple(p for _, p in rows))


def _read_rows(path: Path) -> tuple[list[str], list[tuple[int, dict]]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty price file")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        missing = [c for c in PRICE_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}", 1)
        rows = [(reader.line_num, row) for row in reader]
    return header, rows


def _point(row: dict, lineno: int) -> PricePoint:
    if any(row.get(c) in (None, "") for c in PRICE_COLUMNS):
        raise ParseError("missing field", lineno)
    values = {c: _decimal(row[c], lineno, c) for c in PRICE_COLUMNS[1:]}
    try:
        return PricePoint(_date(row["date"], lineno), **values)
    except ValidationError as exc:
        raise ValidationError(f"line {lineno}: {exc}") from None


def load_price_series(source: str | Path, asset_id: str) -> PriceSeries:
    """Read one asset's daily prices.

    ``source`` is either a single-asset file (``date,open,high,low,close``) or
    a combined file with a leading ``asset`` column, in which case only the
    rows for ``asset_id`` are kept. Rows may appear in any order.
    """
    path = Path(source)
    header, rows = _read_rows(path)
    combined = "asset" in header
    points = []
    for lineno, row in rows:
        if combined and (row.get("asset") or "").strip() != asset_id:
            continue
        points.append((lineno, _point(row, lineno)))
    return _build_series(asset_id, points)


def load_price_file(source: str | Path, asset_id: str | None = None) -> dict[str, PriceSeries]:
    """Read every asset in a price file.

    Single-asset files need ``asset_id`` (defaults to the file stem).
    """
    path = Path(source)
    header, rows = _read_rows(path)
    if "asset" not in header:
        name = asset_id or path.stem
        return {name: load_price_series(path, name)}
    grouped: dict[str, list] = defaultdict(list)
    for lineno, row in rows:
        name = (row.get("asset") or "").strip()
        if not name:
            raise ParseError("missing asset", lineno)
        grouped[name].append((lineno, _point(row, lineno)))
    return {name: _build_series(name, pts) for name, pts in grouped.items()}


def log_returns(series: PriceSeries) -> ReturnSeries:
    if len(series) < 2:
        raise InsufficientDataError(f"{series.asset_id}: need at least 2 prices, got {len(series)}")
    closes = [p.close for p in series.points]
    values = np.array([math.log(float(_RATIO_CTX.divide(b, a))) for a, b in zip(closes, closes[1:])])
    return ReturnSeries(series.asset_id, tuple(series.dates[1:]), values)


def _window_stats(window: np.ndarray) -> tuple[float, float]:
    n = len(window)
    mean = float(np.sum(window) / n)
    var = float(np.sum((window - mean) ** 2) / (n - 1))
    return mean, var


def rolling_stats(
    returns: ReturnSeries,
    window: int = DEFAULT_WINDOW,
    min_periods: int | None = None,
    last: int | None = None,
) -> list[RiskStats]:
    """Trailing-window mean, variance and volatility for each return date.

    With the default ``min_periods`` (= ``window``) only full windows are
    produced. A smaller ``min_periods`` lets early dates use all history so
    far, which is how short-lived assets are handled. ``last`` keeps only the
    final ``last`` dates.
    """
    if window < 2:
        raise ValueError("window must be at least 2")
    min_periods = window if min_periods is None else min_periods
    if min_periods < 2:
        raise ValueError("min_periods must be at least 2")
    if len(returns) < min_periods:
        raise InsufficientDataError(
            f"{returns.asset_id}: {len(returns)} returns, need at least {min_periods}"
        )
    out = []
    values = returns.values
    first = min_periods if last is None else max(min_periods, len(values) + 1 - last)
    for end in range(first, len(values) + 1):
        w = values[max(0, end - window):end]
        mean, var = _window_stats(w)
        out.append(RiskStats(returns.asset_id, returns.dates[end - 1], len(w), mean, var, math.sqrt(var)))
    return out


def vvv_adjusted_volatility(
    stats: Sequence[RiskStats],
    window: int = DEFAULT_WINDOW,
    theta: float = 1.0,
    last: int | None = None,
) -> list[RiskStats]:
    """Add the volatility-of-volatility adjustment to a volatility series.

    The factor at each date is the sample standard deviation of the last
    ``window`` log changes of volatility (all available changes while fewer
    exist; at least two are needed). A zero volatility makes its log change
    undefined; that change counts as 0 and the date is flagged. ``last``
    keeps only the final ``last`` dates.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if len(stats) < 3:
        raise InsufficientDataError("need at least 3 volatility values for a vol-of-vol estimate")
    changes = []
    flags = []
    for prev, cur in zip(stats, stats[1:]):
        if prev.volatility > 0 and cur.volatility > 0:
            changes.append(math.log(cur.volatility / prev.volatility))
            flags.append(False)
        else:
            changes.append(0.0)
            flags.append(True)
    changes = np.array(changes)
    out = []
    first = 2 if last is None else max(2, len(changes) + 1 - last)
    for end in range(first, len(changes) + 1):
        lo = max(0, end - window)
        _, var = _window_stats(changes[lo:end])
        factor = math.sqrt(var)
        s = stats[end]
        degenerate = any(flags[lo:end])
        if degenerate:
            log.warning("%s %s: zero volatility inside vol-of-vol window", s.asset_id, s.date)
        out.append(
            RiskStats(
                s.asset_id, s.date, s.window_length, s.mean_return, s.variance, s.volatility,
                vvv_factor=factor,
                vvv_volatility=s.volatility + theta * factor,
                degenerate_vvv=degenerate,
            )
        )
    return out


def risk_stats_at(
    returns: ReturnSeries,
    as_of: date,
    window: int = DEFAULT_WINDOW,
    theta: float = 1.0,
    min_history: int = MIN_HISTORY,
) -> RiskStats:
    """All per-asset statistics for one event date."""
    history = returns.until(as_of)
    if len(history) < min_history:
        raise InsufficientDataError(
            f"{returns.asset_id}: {len(history)} returns before {as_of}, need {min_history}"
        )
    # Only the trailing window of volatility values feeds the factor.
    tail = history
    needed = 2 * window + 1
    if len(history) > needed:
        tail = ReturnSeries(history.asset_id, history.dates[-needed:], history.values[-needed:])
    vols = rolling_stats(tail, window, min_periods=min(min_history, len(tail)), last=window + 1)
    if len(vols) >= 3:
        return vvv_adjusted_volatility(vols, window, theta, last=1)[-1]
    s = vols[-1]
    return RiskStats(s.asset_id, s.date, s.window_length, s.mean_return, s.variance, s.volatility,
                     0.0, s.volatility, False)


def covariance_matrix(
    returns: Iterable[ReturnSeries],
    window: int = DEFAULT_WINDOW,
    as_of: date | None = None,
    min_history: int = MIN_HISTORY,
) -> CovarianceMatrix:
    """Sample covariance over the trailing ``window`` dates common to all assets."""
    returns = list(returns)
    if not returns:
        raise InsufficientDataError("no assets")
    if as_of is not None:
        returns = [r.until(as_of) for r in returns]
    common = set(returns[0].dates)
    for r in returns[1:]:
        common &= set(r.dates)
    days = sorted(common)[-window:]
    if len(days) < max(min_history, 2):
        raise InsufficientDataError(
            f"only {len(days)} overlapping return dates for {[r.asset_id for r in returns]}"
        )
    wanted = set(days)
    cols = []
    for r in returns:
        cols.append(np.array([v for d, v in zip(r.dates, r.values) if d in wanted]))
    data = np.vstack(cols)
    centered = data - data.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / (len(days) - 1)
    cov = (cov + cov.T) / 2
    return CovarianceMatrix(tuple(r.asset_id for r in returns), cov)
