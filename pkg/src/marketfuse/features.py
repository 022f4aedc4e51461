"""Numeric feature engineering: returns, volatility, standardization, SMOTE.

The eight-dimensional feature vector has a fixed, documented order:

    0 open                 day t (the only unlagged column)
    1 sentiment_volatility day t-1, population std of that day's article sentiments
    2 agg_sentiment        day t-1, mean article sentiment
    3 close                day t-1
    4 high                 day t-1
    5 volume               day t-1
    6 daily_return         day t-1, simple return (close_t - close_{t-1}) / close_{t-1}
    7 volatility           day t-1, rolling population std of daily returns

This order is part of the public contract; checkpoints embed it and refuse
to evaluate against a different one. All standard deviations here are
population (divide-by-N) for internal consistency.
"""

from __future__ import annotations

from dataclasses import dataclass
import datetime as dt

import numpy as np

from .errors import InsufficientDataError

FEATURE_ORDER = (
    "open",
    "sentiment_volatility",
    "agg_sentiment",
    "close",
    "high",
    "volume",
    "daily_return",
    "volatility",
)

# Columns zeroed out in numeric-only baseline mode (post-scaling).
SENTIMENT_FEATURE_INDICES = (1, 2)

DEFAULT_VOLATILITY_WINDOW = 5


@dataclass(frozen=True)
class FeatureRow:
    """One sample's numeric view: date, ordered 8-vector, binary label."""

    date: dt.date
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Scaler:
    """Per-feature mean and population std, fitted on training rows only."""

    means: np.ndarray
    stds: np.ndarray
    fitted_on: int


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError(f"k_neighbors must be >= 1, got {self.k_neighbors}")


def daily_return(closes) -> np.ndarray:
    """Simple returns r_t = (close_t - close_{t-1}) / close_{t-1}.

    Output has one fewer element than the input; closes must be positive.
    """
    closes = np.asarray(closes, dtype=np.float64)
    if closes.size < 2:
        raise InsufficientDataError(f"need at least 2 closes, got {closes.size}")
    if not np.all(np.isfinite(closes)) or np.any(closes <= 0):
        raise ValueError("closes must be finite and > 0")
    return np.diff(closes) / closes[:-1]


def rolling_volatility(returns, window: int) -> np.ndarray:
    """Trailing population std of returns over `window` observations.

    Position i of the output covers returns[i : i + window]; the first
    window-1 positions of the input have no value.
    """
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    returns = np.asarray(returns, dtype=np.float64)
    if returns.size < window:
        raise InsufficientDataError(f"need at least {window} returns, got {returns.size}")
    windows = np.lib.stride_tricks.sliding_window_view(returns, window)
    return windows.std(axis=1)


def fit_scaler(X) -> Scaler:
    """Fit per-feature mean and population std on training rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] < 1:
        raise ValueError("fit_scaler needs at least one row")
    return Scaler(means=X.mean(axis=0), stds=X.std(axis=0), fitted_on=X.shape[0])


def transform(scaler: Scaler, X) -> np.ndarray:
    """Standardize rows; constant features (std 0) are centered, not divided."""
    X = np.asarray(X, dtype=np.float64)
    divisors = np.where(scaler.stds == 0.0, 1.0, scaler.stds)
    return (X - scaler.means) / divisors


def smote(X, y, cfg: SmoteConfig) -> tuple[np.ndarray, np.ndarray]:
    """Balance a binary training set by synthetic minority oversampling.

    Each synthetic sample interpolates a random minority point toward one of
    its k nearest minority neighbors (Euclidean) at a uniform random
    fraction. Original rows pass through verbatim and first; synthetic rows
    are appended with the minority label. Deterministic under cfg.seed.

    k is capped at minority_count - 1 (a point cannot be its own neighbor).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ValueError("smote needs both classes present")
    if classes.size > 2:
        raise ValueError(f"smote handles binary labels only, got {classes.size} classes")

    minority_idx = int(np.argmin(counts))
    minority_label = classes[minority_idx]
    need = int(counts.max() - counts.min())
    if need == 0:
        return X.copy(), y.copy()

    minority = X[y == minority_label]
    m = minority.shape[0]
    if m < 2:
        raise ValueError("smote needs at least 2 minority samples (no neighbor exists)")
    k = min(cfg.k_neighbors, m - 1)

    # Pairwise distances; self excluded via +inf. Ties break by row index
    # (stable argsort) so the neighbor table is deterministic.
    deltas = minority[:, None, :] - minority[None, :, :]
    dists = np.sqrt((deltas**2).sum(axis=2))
    np.fill_diagonal(dists, np.inf)
    neighbors = np.argsort(dists, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(cfg.seed)
    base = rng.integers(0, m, size=need)
    pick = rng.integers(0, k, size=need)
    lam = rng.random(need)
    partner = neighbors[base, pick]
    synthetic = minority[base] + lam[:, None] * (minority[partner] - minority[base])

    X_out = np.vstack([X, synthetic])
    y_out = np.concatenate([y, np.full(need, minority_label, dtype=y.dtype)])
    return X_out, y_out
