"""Report files: provenance-stamped JSON plus comparison CSV tables.

Every report embeds the fully resolved config and the content hashes of the
files that produced it, so a report is reproducible from its own header.
Undefined metric values serialize as null (with a reason flag kept
alongside) and infinite profit factors as the string "inf"; neither is ever
coerced to 0. No timestamps anywhere: identical inputs give byte-identical
reports.

The comparison tables mirror the usual presentation of this kind of study:
baseline tables keyed by (feature set, configuration) and fusion tables
keyed by (fusion method, model label), one classification table and one
financial table each.
"""

from __future__ import annotations

import csv
import json
import math

from .config import RunConfig

_FOLD_METRIC_COLUMNS = ("accuracy", "precision", "recall", "f1", "mcc", "dwr", "profit_factor", "sharpe")


def _encode(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def _encode_metrics(metrics: dict) -> dict:
    return {k: _encode(v) for k, v in metrics.items()}


def build_evaluation_report(cfg: RunConfig, dataset_meta: dict, result: dict,
                            artifact_hashes: dict | None = None) -> dict:
    return {
        "report": "evaluation",
        "config": cfg.to_dict(),
        "dataset": dataset_meta,
        "artifacts": artifact_hashes or {},
        "strategy": result["strategy"],
        "n_samples": result["n_samples"],
        "folds": [_encode_metrics(m) for m in result["fold_results"]],
        "aggregate": {
            "mean": _encode_metrics(result["aggregate"]["mean"]),
            "skipped": result["aggregate"]["skipped"],
            "folds": result["aggregate"]["folds"],
        },
        "pooled": _encode_metrics(result["pooled"]),
    }


def build_score_report(cfg: RunConfig, dataset_meta: dict, metrics: dict,
                       predictions_hash: str) -> dict:
    return {
        "report": "external_score",
        "config": cfg.to_dict(),
        "dataset": dataset_meta,
        "artifacts": {"predictions_sha256": predictions_hash},
        "folds": [_encode_metrics(metrics)],
        "aggregate": {"mean": _encode_metrics({k: metrics[k] for k in _FOLD_METRIC_COLUMNS}),
                      "skipped": {}, "folds": 1},
        "pooled": _encode_metrics(metrics),
    }


def write_json(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if value == "inf" or (isinstance(value, float) and math.isinf(value)):
        return "inf"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def write_run_csvs(report: dict, classification_path, financial_path) -> None:
    """Per-run fold tables: one row per fold plus mean and pooled rows."""
    folds = report["folds"]
    mean = report["aggregate"]["mean"]
    pooled = report["pooled"]

    with open(classification_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Fold", "N", "Accuracy", "Precision", "Recall", "F1 score"])
        for m in folds:
            writer.writerow([m.get("fold", 1), m["n"]] + [_fmt(m[k]) for k in ("accuracy", "precision", "recall", "f1")])
        writer.writerow(["mean", ""] + [_fmt(mean[k]) for k in ("accuracy", "precision", "recall", "f1")])
        writer.writerow(["pooled", pooled["n"]] + [_fmt(pooled[k]) for k in ("accuracy", "precision", "recall", "f1")])

    with open(financial_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Fold", "N", "MCC", "Directional Win Rate", "Profit Factor", "Sharpe Ratio"])
        for m in folds:
            writer.writerow([m.get("fold", 1), m["n"]] + [_fmt(m[k]) for k in ("mcc", "dwr", "profit_factor", "sharpe")])
        writer.writerow(["mean", ""] + [_fmt(mean[k]) for k in ("mcc", "dwr", "profit_factor", "sharpe")])
        writer.writerow(["pooled", pooled["n"]] + [_fmt(pooled[k]) for k in ("mcc", "dwr", "profit_factor", "sharpe")])


_BASELINE_FEATURES = {
    "numeric_baseline": "Numerical",
    "sentiment_numeric": "Sentiment score & Numerical",
}
_FUSION_METHODS = {"concat": "Concatenation", "attention": "Attention"}


def _row_identity(report: dict) -> tuple[str, str, str]:
    cfg = report["config"]
    mode = cfg["mode"]
    if mode in _BASELINE_FEATURES:
        configuration = "LR + SMOTE" if cfg["smote"] else "LR"
        return "baseline", _BASELINE_FEATURES[mode], configuration
    label = cfg.get("label") or "default"
    return "fusion", _FUSION_METHODS[mode], label


def write_comparison_tables(reports: list[dict], out_dir) -> list[str]:
    """Assemble side-by-side tables from several evaluation reports.

    Values are the across-fold means. Returns the written file names.
    """
    baseline_rows = []
    fusion_rows = []
    for report in reports:
        kind, group, detail = _row_identity(report)
        mean = report["aggregate"]["mean"]
        row = (group, detail, mean)
        (baseline_rows if kind == "baseline" else fusion_rows).append(row)

    written = []

    def _write(path, head_cols, rows, metric_keys):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(head_cols)
            for group, detail, mean in rows:
                writer.writerow([group, detail] + [_fmt(mean[k]) for k in metric_keys])
        written.append(str(path))

    import os

    if baseline_rows:
        _write(os.path.join(out_dir, "baseline_classification.csv"),
               ["Features", "Configuration", "Accuracy", "Precision", "Recall", "F1 score"],
               baseline_rows, ("accuracy", "precision", "recall", "f1"))
        _write(os.path.join(out_dir, "baseline_financial.csv"),
               ["Features", "Configuration", "MCC", "Directional Win Rate", "Profit Factor", "Sharpe Ratio"],
               baseline_rows, ("mcc", "dwr", "profit_factor", "sharpe"))
    if fusion_rows:
        _write(os.path.join(out_dir, "fusion_classification.csv"),
               ["Market Vector Generation", "Model", "Accuracy", "Precision", "Recall", "F1 score"],
               fusion_rows, ("accuracy", "precision", "recall", "f1"))
        _write(os.path.join(out_dir, "fusion_financial.csv"),
               ["Market Vector Generation", "Model", "MCC", "Directional Win Rate", "Profit Factor", "Sharpe Ratio"],
               fusion_rows, ("mcc", "dwr", "profit_factor", "sharpe"))
    return written
