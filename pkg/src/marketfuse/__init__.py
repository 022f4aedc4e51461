"""marketfuse: deterministic multimodal market/news fusion and backtesting.

Numeric market features and prior-day news embeddings are fused by
concatenation or multi-head cross-modal attention (numeric query, text
keys/values), classified by a logistic head, and evaluated under rolling
time-series splits with both classification and trading metrics.
"""

from .classifier import LRHead, TrainConfig, loss_and_grad, predict_label, predict_proba, train
from .evaluation import (
    BacktestSeries,
    SplitPlan,
    backtest,
    classification_metrics,
    dwr,
    profit_factor,
    random_split,
    score_external_predictions,
    sharpe,
    time_split,
    trading_mcc,
    tss_splits,
)
from .features import (
    FEATURE_ORDER,
    Scaler,
    SmoteConfig,
    daily_return,
    fit_scaler,
    rolling_volatility,
    smote,
    transform,
)
from .fusion import (
    FusionConfig,
    FusionParams,
    attention_fuse,
    attention_fuse_batch,
    concat_fuse,
    fusion_backward,
    fusion_backward_batch,
    init_params,
)
from .ingest import (
    AlignedRow,
    DailyBar,
    FeatureTable,
    MovementLabel,
    align,
    apply_lag,
    build_market_rows,
    compute_movement,
    load_ohlcv,
    quality_report,
)
from .textfeat import ArticleEmbedding, DayText, aggregate_by_date, aggregate_day, load_embeddings

__version__ = "0.1.0"
