"""Pipeline orchestration: prepare -> train -> evaluate, all deterministic.

The dataset artifact is a single JSON document (sorted keys, compact
separators, no timestamps) so reruns over identical inputs are
byte-identical. Rows are sorted by date; day texts are stored once per date
and referenced by each row's prev_date. Rows flagged no_news (lenient
alignment) reconstruct their zero text on load instead of storing it.

Evaluation retrains from scratch inside every fold: the scaler is fitted on
that fold's training rows only, SMOTE (when enabled) resamples only those
training rows after scaling, and per-fold seeds are derived from the global
one, so no information and no randomness crosses fold boundaries.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass

import numpy as np

from . import evaluation
from .checkpoint import Checkpoint, save_checkpoint
from .classifier import LRHead, TrainConfig, TrainResult, predict_label, train
from .config import RunConfig, derive_seed, file_sha256, model_config_hash
from .errors import CompatibilityError, SchemaError
from .features import (
    FEATURE_ORDER,
    SENTIMENT_FEATURE_INDICES,
    Scaler,
    SmoteConfig,
    fit_scaler,
    smote,
    transform,
)
from .fusion import FusionConfig, FusionParams, attention_fuse_batch, init_params
from .ingest import AlignedRow, align, build_market_rows, load_ohlcv, quality_report
from .textfeat import DayText, aggregate_by_date, load_embeddings, zero_day_text

DATASET_FORMAT = "marketfuse-dataset-v1"


@dataclass(frozen=True)
class Dataset:
    feature_order: tuple[str, ...]
    text_dim: int
    alignment: str
    volatility_window: int
    input_hashes: dict
    rows: list[AlignedRow]


def prepare_dataset(cfg: RunConfig) -> tuple[Dataset, dict]:
    """Build the aligned, labeled, lagged dataset plus its quality report."""
    for path in (cfg.ohlcv, cfg.embeddings):
        if not path:
            raise SchemaError("config must set [data] ohlcv and embeddings for prepare")
    bars = load_ohlcv(cfg.ohlcv)
    quality = quality_report(bars)
    articles = load_embeddings(cfg.embeddings)
    if not articles:
        text_dim = 0
    else:
        text_dim = int(articles[0].vector.shape[0])
    day_texts = aggregate_by_date(articles)
    market_rows = build_market_rows(bars, cfg.volatility_window)
    rows = align(market_rows, day_texts, mode=cfg.alignment, text_dim=text_dim or None)
    if text_dim == 0:
        text_dim = int(rows[0].text.mean_embedding.shape[0])

    dropped = [r.date.isoformat() for r in market_rows if r.prev_date not in day_texts]
    quality = dict(quality)
    quality.update(
        {
            "market_rows": len(market_rows),
            "aligned_rows": len(rows),
            "alignment": cfg.alignment,
            "no_prior_news_dates": dropped,
            "no_news_rows": sum(1 for r in rows if r.no_news),
            "article_count": len(articles),
            "news_dates": len(day_texts),
        }
    )
    dataset = Dataset(
        feature_order=FEATURE_ORDER,
        text_dim=text_dim,
        alignment=cfg.alignment,
        volatility_window=cfg.volatility_window,
        input_hashes={
            "ohlcv_sha256": file_sha256(cfg.ohlcv),
            "embeddings_sha256": file_sha256(cfg.embeddings),
        },
        rows=rows,
    )
    return dataset, quality


def write_dataset(path, dataset: Dataset) -> None:
    day_texts: dict[str, dict] = {}
    rows_json = []
    for row in dataset.rows:
        prev = row.prev_date.isoformat()
        if not row.no_news and prev not in day_texts:
            day_texts[prev] = {
                "tokens": [[float(v) for v in tok] for tok in row.text.tokens],
                "mean_embedding": [float(v) for v in row.text.mean_embedding],
                "agg_sentiment": float(row.text.agg_sentiment),
                "sentiment_volatility": float(row.text.sentiment_volatility),
            }
        rows_json.append(
            {
                "date": row.date.isoformat(),
                "prev_date": prev,
                "x_raw": [float(v) for v in row.x_raw],
                "label": int(row.label),
                "movement": float(row.movement),
                "realized_return": float(row.realized_return),
                "no_news": bool(row.no_news),
            }
        )
    doc = {
        "format": DATASET_FORMAT,
        "feature_order": list(dataset.feature_order),
        "text_dim": dataset.text_dim,
        "alignment": dataset.alignment,
        "volatility_window": dataset.volatility_window,
        "inputs": dataset.input_hashes,
        "day_texts": day_texts,
        "rows": rows_json,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from None
    if doc.get("format") != DATASET_FORMAT:
        raise SchemaError(f"{path}: unknown dataset format {doc.get('format')!r}")
    text_dim = int(doc["text_dim"])
    texts: dict[str, DayText] = {}
    for date_s, blob in doc["day_texts"].items():
        texts[date_s] = DayText(
            date=dt.date.fromisoformat(date_s),
            tokens=tuple(np.asarray(tok, dtype=np.float64) for tok in blob["tokens"]),
            mean_embedding=np.asarray(blob["mean_embedding"], dtype=np.float64),
            agg_sentiment=float(blob["agg_sentiment"]),
            sentiment_volatility=float(blob["sentiment_volatility"]),
        )
    rows = []
    for rj in doc["rows"]:
        prev = rj["prev_date"]
        if rj["no_news"]:
            text = zero_day_text(dt.date.fromisoformat(prev), text_dim)
        else:
            text = texts[prev]
        rows.append(
            AlignedRow(
                date=dt.date.fromisoformat(rj["date"]),
                prev_date=dt.date.fromisoformat(prev),
                x_raw=np.asarray(rj["x_raw"], dtype=np.float64),
                text=text,
                label=int(rj["label"]),
                movement=float(rj["movement"]),
                realized_return=float(rj["realized_return"]),
                no_news=bool(rj["no_news"]),
            )
        )
    return Dataset(
        feature_order=tuple(doc["feature_order"]),
        text_dim=text_dim,
        alignment=doc["alignment"],
        volatility_window=int(doc["volatility_window"]),
        input_hashes=dict(doc["inputs"]),
        rows=rows,
    )


def _fusion_config(cfg: RunConfig, text_dim: int, init_seed: int) -> FusionConfig:
    return FusionConfig(
        d_n=len(FEATURE_ORDER),
        d_t=text_dim,
        d_model=cfg.d_model,
        h=cfg.heads,
        dropout_p=cfg.dropout,
        mode="attention" if cfg.mode == "attention" else "concat",
        token_source=cfg.token_source,
        d_out=cfg.d_out,
        seed=init_seed,
    )


def _tokens_for_row(row: AlignedRow, token_source: str) -> np.ndarray:
    if token_source == "pooled_single":
        return row.text.mean_embedding[None, :]
    return np.stack(row.text.tokens)


def _design_matrix(cfg: RunConfig, X_scaled: np.ndarray, rows) -> np.ndarray:
    """Design matrix the head sees in the non-attention modes."""
    if cfg.mode == "numeric_baseline":
        X = X_scaled.copy()
        X[:, list(SENTIMENT_FEATURE_INDICES)] = 0.0  # head stays 8-wide, sentiment muted
        return X
    if cfg.mode == "sentiment_numeric":
        return X_scaled
    if cfg.mode == "concat":
        means = np.stack([r.text.mean_embedding for r in rows])
        return np.hstack([X_scaled, means])
    raise ValueError(f"no design matrix for mode {cfg.mode!r}")


@dataclass
class TrainedModel:
    mode: str
    scaler: Scaler
    head: LRHead
    fusion_params: FusionParams | None
    fusion_cfg: FusionConfig | None
    loss_trace: list[float]


def _train_on_rows(cfg: RunConfig, rows, fold: int = 0) -> TrainedModel:
    X_raw = np.stack([r.x_raw for r in rows])
    y = np.array([r.label for r in rows], dtype=np.int64)
    scaler = fit_scaler(X_raw)
    X_scaled = transform(scaler, X_raw)
    train_cfg = TrainConfig(
        learning_rate=cfg.learning_rate,
        l2_lambda=cfg.l2_lambda,
        max_epochs=cfg.max_epochs,
        tolerance=cfg.tolerance,
        seed=derive_seed(cfg.seed, "dropout", fold),
    )
    if cfg.mode == "attention":
        text_dim = rows[0].text.mean_embedding.shape[0]
        fusion_cfg = _fusion_config(cfg, text_dim, derive_seed(cfg.seed, "init", fold))
        tokens = [_tokens_for_row(r, cfg.token_source) for r in rows]
        result: TrainResult = train(
            X_scaled, y, train_cfg, fusion_cfg=fusion_cfg, fusion_params=init_params(fusion_cfg),
            tokens=tokens,
        )
        return TrainedModel(cfg.mode, scaler, result.head, result.fusion_params, fusion_cfg,
                            result.loss_trace)
    M = _design_matrix(cfg, X_scaled, rows)
    if cfg.smote:
        M, y = smote(M, y, SmoteConfig(k_neighbors=cfg.smote_k, seed=derive_seed(cfg.seed, "smote", fold)))
    result = train(M, y, train_cfg)
    return TrainedModel(cfg.mode, scaler, result.head, None, None, result.loss_trace)


def _predict_rows(model: TrainedModel, cfg: RunConfig, rows) -> np.ndarray:
    X_scaled = transform(model.scaler, np.stack([r.x_raw for r in rows]))
    if model.mode == "attention":
        preds = np.empty(len(rows), dtype=np.int64)
        tokens = [_tokens_for_row(r, cfg.token_source) for r in rows]
        for i, toks in enumerate(tokens):
            M, _ = attention_fuse_batch(
                X_scaled[i : i + 1], toks[None, :, :], model.fusion_params, model.fusion_cfg,
                training=False,
            )
            preds[i] = predict_label(model.head, M[0])
        return preds
    M = _design_matrix(cfg, X_scaled, rows)
    return predict_label(model.head, M)


def _checkpoint_config(cfg: RunConfig, dataset: Dataset) -> dict:
    return {
        "run_config": cfg.to_dict(),
        "feature_order": list(dataset.feature_order),
        "text_dim": dataset.text_dim,
        "config_hash": model_config_hash(cfg, dataset.text_dim, dataset.feature_order),
        "inputs": dataset.input_hashes,
    }


def train_run(cfg: RunConfig, dataset: Dataset) -> tuple[dict, list[tuple[str, np.ndarray]], list[float]]:
    """Train the final model on all rows; returns checkpoint content."""
    model = _train_on_rows(cfg, dataset.rows, fold=0)
    arrays: list[tuple[str, np.ndarray]] = [
        ("scaler_means", model.scaler.means),
        ("scaler_stds", model.scaler.stds),
    ]
    if model.fusion_params is not None:
        arrays.extend(model.fusion_params.matrices())
    arrays.append(("head_w", model.head.w))
    arrays.append(("head_b", np.array([model.head.b])))
    return _checkpoint_config(cfg, dataset), arrays, model.loss_trace


def write_checkpoint_file(path, cfg: RunConfig, dataset: Dataset) -> list[float]:
    config, arrays, trace = train_run(cfg, dataset)
    save_checkpoint(path, config, arrays)
    return trace


def check_checkpoint_compatibility(cfg: RunConfig, dataset: Dataset, ckpt: Checkpoint) -> None:
    expected = model_config_hash(cfg, dataset.text_dim, dataset.feature_order)
    embedded = ckpt.config.get("config_hash")
    if embedded != expected:
        raise CompatibilityError(
            f"checkpoint config hash {embedded} does not match requested configuration {expected}"
        )


def _split_plan(cfg: RunConfig, n: int) -> evaluation.SplitPlan:
    if cfg.strategy == "tss":
        return evaluation.tss_splits(n, k=cfg.folds)
    if cfg.strategy == "time":
        return evaluation.time_split(n, ratio=cfg.train_ratio)
    return evaluation.random_split(n, ratio=cfg.train_ratio, seed=derive_seed(cfg.seed, "shuffle"))


def evaluate_run(cfg: RunConfig, dataset: Dataset) -> dict:
    """Run the configured split plan, retraining from scratch per fold."""
    rows = dataset.rows
    plan = _split_plan(cfg, len(rows))
    fold_results = []
    pooled_true: list[int] = []
    pooled_pred: list[int] = []
    pooled_ret: list[float] = []
    for fold_no, (train_idx, test_idx) in enumerate(plan.folds, start=1):
        train_rows = [rows[i] for i in train_idx]
        test_rows = [rows[i] for i in test_idx]
        model = _train_on_rows(cfg, train_rows, fold=fold_no)
        y_pred = _predict_rows(model, cfg, test_rows)
        y_true = np.array([r.label for r in test_rows], dtype=np.int64)
        returns = np.array([r.realized_return for r in test_rows], dtype=np.float64)
        metrics = evaluation.evaluate_fold(y_true, y_pred, returns)
        metrics["fold"] = fold_no
        metrics["n_train"] = len(train_rows)
        metrics["train_loss_final"] = model.loss_trace[-1]
        metrics["epochs"] = len(model.loss_trace) - 1
        fold_results.append(metrics)
        pooled_true.extend(int(v) for v in y_true)
        pooled_pred.extend(int(v) for v in y_pred)
        pooled_ret.extend(float(v) for v in returns)
    aggregate = evaluation.aggregate_metrics(fold_results)
    pooled = evaluation.evaluate_fold(
        np.array(pooled_true), np.array(pooled_pred), np.array(pooled_ret)
    )
    return {
        "strategy": plan.strategy,
        "n_samples": len(rows),
        "fold_results": fold_results,
        "aggregate": aggregate,
        "pooled": pooled,
    }
