"""Split generation, classification metrics, trading metrics, backtest.

Splits come in three flavors: a seeded random 80/20 shuffle (kept only for
comparability, it breaks temporal order), a single chronological 80/20
split, and the primary expanding-window scheme: k consecutive equal test
blocks taken from the end of the series, each trained on everything before
it. Fold sizing uses test_size = floor(n / (k+1)); leftover early samples
join every training window.

Metrics that have no defined value (no long positions, zero variance, zero
denominator) are reported as absent with a reason flag, never coerced to 0,
so cross-fold averages can skip them honestly. The backtest return
convention is open-to-close: r_t = (close_t - open_t) / open_t, because the
position is decided before day t's open using only lagged features plus the
day-t open itself; a close-to-close return would credit the strategy with
the overnight gap it predicted from.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, InsufficientDataError, SchemaError

UP_TOKEN = "up"
DOWN_TOKEN = "down"


@dataclass(frozen=True)
class SplitPlan:
    strategy: str
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    seed: int | None = None
    k: int | None = None
    ratio: float | None = None


@dataclass(frozen=True)
class BacktestSeries:
    """Long-only equity path: positions p_t in {0,1}, equity = prod(1 + p_t r_t)."""

    dates: tuple[dt.date, ...]
    positions: np.ndarray
    returns: np.ndarray
    strategy_returns: np.ndarray
    equity: np.ndarray


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    tp: int
    fp: int
    tn: int
    fn: int


def _check_ratio(n: int, ratio: float) -> int:
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"train ratio must be in (0, 1), got {ratio}")
    train_size = math.ceil(ratio * n)
    if train_size >= n:
        raise ValueError(f"ratio {ratio} leaves an empty test set for n={n}")
    if train_size < 1:
        raise ValueError(f"ratio {ratio} leaves an empty training set for n={n}")
    return train_size


def random_split(n: int, ratio: float = 0.8, seed: int = 0) -> SplitPlan:
    """Seeded shuffle; first ceil(ratio*n) indices train, the rest test."""
    if n < 5:
        raise InsufficientDataError(f"random split needs n >= 5, got {n}")
    train_size = _check_ratio(n, ratio)
    perm = np.random.default_rng(seed).permutation(n)
    fold = (perm[:train_size].copy(), perm[train_size:].copy())
    return SplitPlan(strategy="random", folds=(fold,), seed=seed, ratio=ratio)


def time_split(n: int, ratio: float = 0.8) -> SplitPlan:
    """Chronological split: earliest ceil(ratio*n) samples train."""
    if n < 5:
        raise InsufficientDataError(f"time split needs n >= 5, got {n}")
    train_size = _check_ratio(n, ratio)
    idx = np.arange(n)
    fold = (idx[:train_size], idx[train_size:])
    return SplitPlan(strategy="time", folds=(fold,), ratio=ratio)


def tss_splits(n: int, k: int = 5) -> SplitPlan:
    """Expanding-window folds: k consecutive test blocks covering a suffix.

    test_size = floor(n / (k+1)); fold j (1-based) tests
    [n - (k-j+1)*test_size, n - (k-j)*test_size) and trains on every earlier
    index, so max(train) < min(test) in every fold.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < 2 * (k + 1):
        raise InsufficientDataError(f"tss needs n >= {2 * (k + 1)} for k={k}, got {n}")
    test_size = n // (k + 1)
    idx = np.arange(n)
    folds = []
    for j in range(1, k + 1):
        test_start = n - (k - j + 1) * test_size
        test_end = n - (k - j) * test_size
        folds.append((idx[:test_start].copy(), idx[test_start:test_end].copy()))
    return SplitPlan(strategy="tss", folds=tuple(folds), k=k)


def _as_aligned_pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty input")
    return a, b


def classification_metrics(y_true, y_pred) -> ClassificationMetrics:
    """Confusion-matrix metrics with Up (1) as the positive class.

    Precision is absent (None) when nothing was predicted Up, recall when
    nothing was truly Up; f1 is absent whenever either component is.
    """
    y_true, y_pred = _as_aligned_pair(y_true, y_pred)
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    fp = int(np.sum((y_pred == 1) & (y_true == 0)))
    tn = int(np.sum((y_pred == 0) & (y_true == 0)))
    fn = int(np.sum((y_pred == 0) & (y_true == 1)))
    accuracy = (tp + tn) / y_true.size
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    # 2TP / (2TP + FP + FN) == harmonic mean of P and R, and stays defined
    # when both are 0.
    f1 = 2 * tp / (2 * tp + fp + fn) if (precision is not None and recall is not None) else None
    return ClassificationMetrics(accuracy, precision, recall, f1, tp, fp, tn, fn)


def trading_mcc(positions, returns) -> float:
    """Matthews correlation between positions and realized direction.

    The realized direction is 1 when r_t > 0 else 0. Any zero factor under
    the square root makes the coefficient 0 by convention.
    """
    p, r = _as_aligned_pair(positions, returns)
    d = (r > 0).astype(np.int64)
    p = p.astype(np.int64)
    tp = int(np.sum((p == 1) & (d == 1)))
    fp = int(np.sum((p == 1) & (d == 0)))
    tn = int(np.sum((p == 0) & (d == 0)))
    fn = int(np.sum((p == 0) & (d == 1)))
    denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom_sq)


def dwr(positions, returns) -> float | None:
    """Fraction of long days with positive return; absent with no longs."""
    p, r = _as_aligned_pair(positions, returns)
    longs = p == 1
    n_longs = int(longs.sum())
    if n_longs == 0:
        return None
    return int(((r > 0) & longs).sum()) / n_longs


def profit_factor(positions, returns) -> float | None:
    """Gross profits over gross losses of p_t*r_t.

    Positive profit with zero loss reports +inf; zero activity on both
    sides is absent.
    """
    p, r = _as_aligned_pair(positions, returns)
    strat = p * r
    gross_profit = float(strat[strat > 0].sum())
    gross_loss = float(-strat[strat < 0].sum())
    if gross_loss == 0.0:
        return math.inf if gross_profit > 0.0 else None
    return gross_profit / gross_loss


def sharpe(positions, returns) -> float | None:
    """Mean of p_t*r_t over its population std, flat days included as zeros.

    No annualization. Zero variance (including an all-flat strategy) is
    absent rather than infinite.
    """
    p, r = _as_aligned_pair(positions, returns)
    if p.size < 2:
        raise InsufficientDataError(f"sharpe needs at least 2 observations, got {p.size}")
    strat = p * r
    std = float(strat.std())
    if std == 0.0:
        return None
    return float(strat.mean()) / std


def backtest(predictions, returns, dates: Sequence[dt.date]) -> BacktestSeries:
    """Long-only simulation: hold on predicted-Up days, flat otherwise."""
    preds, rets = _as_aligned_pair(predictions, returns)
    if len(dates) != preds.size:
        raise ValueError(f"dates length {len(dates)} != series length {preds.size}")
    positions = (preds == 1).astype(np.int64)
    strategy = positions * rets.astype(np.float64)
    equity = np.cumprod(1.0 + strategy)
    return BacktestSeries(
        dates=tuple(dates),
        positions=positions,
        returns=rets.astype(np.float64),
        strategy_returns=strategy,
        equity=equity,
    )


def evaluate_fold(y_true, y_pred, returns) -> dict:
    """Full metric suite for one test window; absent metrics carry flags."""
    cls = classification_metrics(y_true, y_pred)
    p = np.asarray(y_pred).astype(np.int64)
    r = np.asarray(returns, dtype=np.float64)
    flags: dict[str, str] = {}
    if cls.precision is None:
        flags["precision"] = "no_predicted_up_days"
    if cls.recall is None:
        flags["recall"] = "no_actual_up_days"
    if cls.f1 is None:
        flags["f1"] = "undefined_component"
    dwr_v = dwr(p, r)
    if dwr_v is None:
        flags["dwr"] = "no_positions"
    pf_v = profit_factor(p, r)
    if pf_v is None:
        flags["profit_factor"] = "no_trades"
    elif math.isinf(pf_v):
        flags["profit_factor"] = "no_losing_days"
    if p.size >= 2:
        sr_v = sharpe(p, r)
        if sr_v is None:
            flags["sharpe"] = "constant_strategy"
    else:
        sr_v = None
        flags["sharpe"] = "too_few_days"
    strategy = p * r
    return {
        "n": int(p.size),
        "accuracy": cls.accuracy,
        "precision": cls.precision,
        "recall": cls.recall,
        "f1": cls.f1,
        "mcc": trading_mcc(p, r),
        "dwr": dwr_v,
        "profit_factor": pf_v,
        "sharpe": sr_v,
        "long_days": int(p.sum()),
        "final_equity": float(np.prod(1.0 + strategy)),
        "flags": flags,
    }


_METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "mcc", "dwr", "profit_factor", "sharpe")


def aggregate_metrics(fold_metrics: Sequence[Mapping]) -> dict:
    """Unweighted mean of per-fold metrics, skipping absent/infinite values.

    The skip counts are reported so a mean over 3 of 5 folds is visibly
    partial instead of silently rescaled.
    """
    means: dict[str, float | None] = {}
    skipped: dict[str, int] = {}
    for name in _METRIC_NAMES:
        values = []
        skip = 0
        for fm in fold_metrics:
            v = fm[name]
            if v is None or (isinstance(v, float) and math.isinf(v)):
                skip += 1
            else:
                values.append(v)
        means[name] = sum(values) / len(values) if values else None
        if skip:
            skipped[name] = skip
    return {"mean": means, "skipped": skipped, "folds": len(fold_metrics)}


def load_predictions(path) -> dict[dt.date, int]:
    """Parse a `date,up|down` prediction file (case-insensitive tokens).

    A leading `date,prediction` header row is allowed. Unknown tokens and
    duplicate dates are rejected with their row number.
    """
    out: dict[dt.date, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            date_s, token = row[0].strip(), row[1].strip().lower()
            if lineno == 1 and date_s.lower() == "date" and token == "prediction":
                continue
            try:
                date = dt.date.fromisoformat(date_s)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: bad date {date_s!r}") from None
            if token not in (UP_TOKEN, DOWN_TOKEN):
                raise SchemaError(
                    f"{path}: line {lineno}: prediction must be 'up' or 'down', got {row[1]!r}"
                )
            if date in out:
                raise DataError(f"{path}: line {lineno}: duplicate date {date.isoformat()}")
            out[date] = 1 if token == UP_TOKEN else 0
    if not out:
        raise DataError(f"{path}: no predictions found")
    return out


def score_external_predictions(path, rows) -> dict:
    """Score a prediction file against dataset rows (full metric suite).

    Every dataset date must be covered; extra file dates are ignored. Rows
    need `date`, `label` and `realized_return` attributes.
    """
    preds_by_date = load_predictions(path)
    missing = [r.date.isoformat() for r in rows if r.date not in preds_by_date]
    if missing:
        raise DataError(f"{path}: predictions missing for dates: {', '.join(missing)}")
    y_true = np.array([r.label for r in rows], dtype=np.int64)
    y_pred = np.array([preds_by_date[r.date] for r in rows], dtype=np.int64)
    returns = np.array([r.realized_return for r in rows], dtype=np.float64)
    metrics = evaluate_fold(y_true, y_pred, returns)
    metrics["dates"] = [r.date.isoformat() for r in rows]
    return metrics
