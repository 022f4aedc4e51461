"""Market-data ingestion: OHLCV loading, movement labels, lagging, alignment.

The temporal contract is the heart of this module: a sample for day t may
use day t's open and nothing else from day t. Every other numeric column is
shifted back by one trading day, and the paired news text comes from the
previous trading day (previous row in the bar sequence, not the previous
calendar day).

OHLCV CSV format: header exactly `date,open,high,close,volume`, ISO-8601
dates, decimal-point numbers, comma delimiter, UTF-8, no thousands
separators.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, EmptyDatasetError, InsufficientDataError, SchemaError
from .features import daily_return, rolling_volatility
from .textfeat import DayText, zero_day_text

OHLCV_HEADER = ("date", "open", "high", "close", "volume")

UP = 1
DOWN = 0


@dataclass(frozen=True)
class DailyBar:
    """One trading day's open/high/close/volume record."""

    date: dt.date
    open: float
    high: float
    close: float
    volume: float


@dataclass(frozen=True)
class MovementLabel:
    """Signed open-minus-prior-close delta and its binary direction.

    label is UP only for strictly positive movement; an exact zero counts
    as DOWN so the long-only backtest never opens a position on zero
    expected movement.
    """

    date: dt.date
    movement: float
    label: int


@dataclass(frozen=True)
class FeatureTable:
    """Dated columnar table; all columns share the length of `dates`."""

    dates: tuple[dt.date, ...]
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        n = len(self.dates)
        for name, values in self.columns.items():
            if len(values) != n:
                raise ValueError(f"column {name!r} has {len(values)} rows, expected {n}")


@dataclass(frozen=True)
class MarketRow:
    """One labeled, lagged market-data row (text not yet attached).

    open is the day-t value; close/high/volume/daily_return/volatility are
    day t-1 values. realized_return is day t's open-to-close return, kept
    only as the evaluation target for the backtest.
    """

    date: dt.date
    prev_date: dt.date
    open: float
    close: float
    high: float
    volume: float
    daily_return: float
    volatility: float
    label: int
    movement: float
    realized_return: float


@dataclass(frozen=True)
class AlignedRow:
    """One sample: 8-vector of raw numerics, prior-day text, day-t label."""

    date: dt.date
    prev_date: dt.date
    x_raw: np.ndarray
    text: DayText
    label: int
    movement: float
    realized_return: float
    no_news: bool


def load_ohlcv(path) -> list[DailyBar]:
    """Parse an OHLCV CSV, enforcing schema, value validity and date order."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(OHLCV_HEADER)}") from None
        if tuple(h.strip() for h in header) != OHLCV_HEADER:
            raise SchemaError(
                f"{path}: header must be {','.join(OHLCV_HEADER)!r}, got {','.join(header)!r}"
            )
        bars: list[DailyBar] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"{path}: line {lineno}: expected 5 fields, got {len(row)}")
            bar = _parse_bar(path, lineno, row)
            if bars and bar.date <= bars[-1].date:
                kind = "duplicate" if bar.date == bars[-1].date else "decreasing"
                raise DataError(f"{path}: line {lineno}: {kind} date {bar.date.isoformat()}")
            bars.append(bar)
    if not bars:
        raise DataError(f"{path}: no data rows")
    return bars


def _parse_bar(path, lineno: int, row: Sequence[str]) -> DailyBar:
    date_s, open_s, high_s, close_s, volume_s = (field.strip() for field in row)
    try:
        date = dt.date.fromisoformat(date_s)
    except ValueError:
        raise DataError(f"{path}: line {lineno}: bad date {date_s!r}") from None
    values = {}
    for name, text in (("open", open_s), ("high", high_s), ("close", close_s), ("volume", volume_s)):
        try:
            values[name] = float(text)
        except ValueError:
            raise DataError(f"{path}: line {lineno}: bad number {text!r} in column {name!r}") from None
        if not np.isfinite(values[name]):
            raise DataError(f"{path}: line {lineno}: non-finite value in column {name!r}")
    for name in ("open", "high", "close"):
        if values[name] <= 0:
            raise DataError(f"{path}: line {lineno}: {name} must be > 0, got {values[name]}")
    if values["volume"] < 0:
        raise DataError(f"{path}: line {lineno}: volume must be >= 0, got {values['volume']}")
    return DailyBar(date=date, **values)


def quality_report(bars: Sequence[DailyBar]) -> dict:
    """Flag vendor-data anomalies without repairing them.

    High below max(open, close) is reported, never altered: data quirks
    should be visible downstream.
    """
    anomalies = []
    for bar in bars:
        if bar.high < max(bar.open, bar.close):
            anomalies.append(
                {
                    "date": bar.date.isoformat(),
                    "kind": "high_below_body",
                    "detail": f"high={bar.high} < max(open={bar.open}, close={bar.close})",
                }
            )
        if bar.volume == 0:
            anomalies.append({"date": bar.date.isoformat(), "kind": "zero_volume", "detail": "volume=0"})
    return {
        "rows": len(bars),
        "first_date": bars[0].date.isoformat() if bars else None,
        "last_date": bars[-1].date.isoformat() if bars else None,
        "anomaly_count": len(anomalies),
        "anomalies": anomalies,
    }


def compute_movement(bars: Sequence[DailyBar]) -> list[MovementLabel]:
    """Label each day after the first: movement_t = open_t - close_{t-1}."""
    if len(bars) < 2:
        raise InsufficientDataError(f"need at least 2 bars, got {len(bars)}")
    out = []
    for prev, cur in zip(bars, bars[1:]):
        movement = cur.open - prev.close
        out.append(MovementLabel(date=cur.date, movement=movement,
                                 label=UP if movement > 0 else DOWN))
    return out


def apply_lag(table: FeatureTable, lag: int, exempt: frozenset[str] | set[str] = frozenset()) -> FeatureTable:
    """Shift every non-exempt column back by `lag` rows.

    Row t of the result holds the raw value from row t-lag for non-exempt
    columns and the day-t value for exempt ones; the first `lag` rows are
    dropped because they have no complete history.
    """
    if lag < 1:
        raise ValueError(f"lag must be >= 1, got {lag}")
    missing = set(exempt) - set(table.columns)
    if missing:
        raise ValueError(f"exempt columns not present: {sorted(missing)}")
    n = len(table.dates)
    if n < lag + 1:
        raise InsufficientDataError(f"need at least {lag + 1} rows to lag by {lag}, got {n}")
    columns = {
        name: (values[lag:].copy() if name in exempt else values[:-lag].copy())
        for name, values in table.columns.items()
    }
    return FeatureTable(dates=tuple(table.dates[lag:]), columns=columns)


def build_market_rows(bars: Sequence[DailyBar], volatility_window: int) -> list[MarketRow]:
    """Derive labeled, lagged market rows from raw bars.

    Needs volatility_window + 2 bars: the rolling volatility consumes
    `window` returns and the lag drops one more leading row.
    """
    n = len(bars)
    if n < volatility_window + 2:
        raise InsufficientDataError(
            f"need at least {volatility_window + 2} bars for window {volatility_window}, got {n}"
        )
    closes = np.array([b.close for b in bars], dtype=np.float64)
    returns = daily_return(closes)                       # index i -> bars[i+1].date
    vols = rolling_volatility(returns, volatility_window)  # index i -> bars[i+volatility_window].date

    # Raw day-t table over bars[window:] where every column is defined.
    start = volatility_window
    dates = tuple(b.date for b in bars[start:])
    raw = FeatureTable(
        dates=dates,
        columns={
            "open": np.array([b.open for b in bars[start:]]),
            "high": np.array([b.high for b in bars[start:]]),
            "close": closes[start:].copy(),
            "volume": np.array([b.volume for b in bars[start:]]),
            "daily_return": returns[start - 1:].copy(),
            "volatility": vols.copy(),
        },
    )
    lagged = apply_lag(raw, lag=1, exempt={"open"})

    labels = {m.date: m for m in compute_movement(bars)}
    by_date = {b.date: b for b in bars}
    prev_dates = {bars[i].date: bars[i - 1].date for i in range(1, n)}

    rows = []
    for i, date in enumerate(lagged.dates):
        move = labels[date]
        bar = by_date[date]
        rows.append(
            MarketRow(
                date=date,
                prev_date=prev_dates[date],
                open=float(lagged.columns["open"][i]),
                close=float(lagged.columns["close"][i]),
                high=float(lagged.columns["high"][i]),
                volume=float(lagged.columns["volume"][i]),
                daily_return=float(lagged.columns["daily_return"][i]),
                volatility=float(lagged.columns["volatility"][i]),
                label=move.label,
                movement=float(move.movement),
                realized_return=(bar.close - bar.open) / bar.open,
            )
        )
    return rows


def align(
    rows: Sequence[MarketRow],
    day_texts: Mapping[dt.date, DayText],
    mode: str = "strict",
    text_dim: int | None = None,
) -> list[AlignedRow]:
    """Pair each market row with the previous trading day's text.

    strict drops days whose previous trading day has no articles; lenient
    keeps them with a single zero token, zero sentiment statistics and the
    no_news flag set. Raises EmptyDatasetError when no market row overlaps
    the news dates at all.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"mode must be 'strict' or 'lenient', got {mode!r}")
    if text_dim is None:
        for day in day_texts.values():
            text_dim = int(day.mean_embedding.shape[0])
            break
    if not any(r.prev_date in day_texts for r in rows):
        raise EmptyDatasetError("no market date has prior-day news; nothing to align")

    out = []
    for row in rows:
        text = day_texts.get(row.prev_date)
        no_news = text is None
        if no_news:
            if mode == "strict":
                continue
            text = zero_day_text(row.prev_date, text_dim)
        x_raw = np.array(
            [
                row.open,
                text.sentiment_volatility,
                text.agg_sentiment,
                row.close,
                row.high,
                row.volume,
                row.daily_return,
                row.volatility,
            ],
            dtype=np.float64,
        )
        out.append(
            AlignedRow(
                date=row.date,
                prev_date=row.prev_date,
                x_raw=x_raw,
                text=text,
                label=row.label,
                movement=row.movement,
                realized_return=row.realized_return,
                no_news=no_news,
            )
        )
    if not out:
        raise EmptyDatasetError("alignment dropped every row (strict mode, no overlapping news)")
    return out
