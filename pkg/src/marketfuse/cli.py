"""Command-line entry point: prepare, train, evaluate, score, report.

    marketfuse prepare  --config run.ini [--out DIR] [--seed N]
    marketfuse train    --config run.ini --dataset dataset.json [--out DIR] [--seed N]
    marketfuse evaluate --config run.ini --dataset dataset.json \
                        --checkpoint checkpoint.stonk [--out DIR] [--seed N]
    marketfuse score    --config run.ini --dataset dataset.json \
                        --predictions preds.csv [--out DIR]
    marketfuse report   --out DIR report.json [report.json ...]

Exit codes: 0 success, 2 schema/config error, 3 data error, 4 numeric
error, 5 compatibility error, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import pipeline, reporting
from .checkpoint import load_checkpoint
from .config import RunConfig, file_sha256, load_config
from .errors import EngineError, SchemaError
from .evaluation import score_external_predictions


def _resolved_config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _out_dir(cfg: RunConfig) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def _dataset_meta(dataset: pipeline.Dataset, dataset_path=None) -> dict:
    meta = {
        "feature_order": list(dataset.feature_order),
        "text_dim": dataset.text_dim,
        "alignment": dataset.alignment,
        "volatility_window": dataset.volatility_window,
        "rows": len(dataset.rows),
        "inputs": dataset.input_hashes,
    }
    if dataset_path is not None:
        meta["dataset_sha256"] = file_sha256(dataset_path)
    return meta


def cmd_prepare(args) -> int:
    cfg = _resolved_config(args)
    for path in (cfg.ohlcv, cfg.embeddings):
        if not os.path.exists(path):
            raise SchemaError(f"input file not found: {path}")
    dataset, quality = pipeline.prepare_dataset(cfg)
    out = _out_dir(cfg)
    dataset_path = os.path.join(out, "dataset.json")
    pipeline.write_dataset(dataset_path, dataset)
    reporting.write_json(os.path.join(out, "quality.json"), quality)
    print(f"prepared {len(dataset.rows)} rows -> {dataset_path}")
    print(f"quality: {quality['anomaly_count']} anomalies, "
          f"{len(quality['no_prior_news_dates'])} dates without prior-day news")
    return 0


def cmd_train(args) -> int:
    cfg = _resolved_config(args)
    dataset = pipeline.load_dataset(args.dataset)
    out = _out_dir(cfg)
    ckpt_path = os.path.join(out, "checkpoint.stonk")
    trace = pipeline.write_checkpoint_file(ckpt_path, cfg, dataset)
    with open(os.path.join(out, "loss_trace.json"), "w", encoding="utf-8") as fh:
        json.dump({"mode": cfg.mode, "loss_trace": trace}, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"trained mode={cfg.mode} on {len(dataset.rows)} rows, "
          f"{len(trace) - 1} epochs, final loss {trace[-1]:.6f} -> {ckpt_path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolved_config(args)
    dataset = pipeline.load_dataset(args.dataset)
    ckpt = load_checkpoint(args.checkpoint)
    pipeline.check_checkpoint_compatibility(cfg, dataset, ckpt)
    result = pipeline.evaluate_run(cfg, dataset)
    out = _out_dir(cfg)
    report = reporting.build_evaluation_report(
        cfg,
        _dataset_meta(dataset, args.dataset),
        result,
        artifact_hashes={"checkpoint_sha256": file_sha256(args.checkpoint)},
    )
    report_path = os.path.join(out, "report.json")
    reporting.write_json(report_path, report)
    reporting.write_run_csvs(
        report,
        os.path.join(out, "report_classification.csv"),
        os.path.join(out, "report_financial.csv"),
    )
    mean = report["aggregate"]["mean"]
    print(f"evaluated strategy={result['strategy']} over {len(result['fold_results'])} fold(s)")
    for name in ("accuracy", "f1", "mcc", "sharpe"):
        value = mean.get(name)
        shown = "n/a" if value is None else (value if isinstance(value, str) else f"{value:.4f}")
        print(f"  mean {name}: {shown}")
    print(f"report -> {report_path}")
    return 0


def cmd_score(args) -> int:
    cfg = _resolved_config(args)
    dataset = pipeline.load_dataset(args.dataset)
    metrics = score_external_predictions(args.predictions, dataset.rows)
    out = _out_dir(cfg)
    report = reporting.build_score_report(
        cfg, _dataset_meta(dataset, args.dataset), metrics, file_sha256(args.predictions)
    )
    report_path = os.path.join(out, "score_report.json")
    reporting.write_json(report_path, report)
    reporting.write_run_csvs(
        report,
        os.path.join(out, "score_classification.csv"),
        os.path.join(out, "score_financial.csv"),
    )
    acc = metrics["accuracy"]
    print(f"scored {metrics['n']} external predictions: accuracy {acc:.4f} -> {report_path}")
    return 0


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            reports.append(json.load(fh))
    os.makedirs(args.out, exist_ok=True)
    written = reporting.write_comparison_tables(reports, args.out)
    for path in written:
        print(f"wrote {path}")
    if not written:
        print("no evaluation reports given; nothing to tabulate")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marketfuse",
        description="Multimodal market/news fusion and walk-forward backtesting engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=False, checkpoint=False, predictions=False):
        p.add_argument("--config", required=True, help="run configuration (INI)")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")
        p.add_argument("--out", default=None, help="override [data] output_dir")
        if dataset:
            p.add_argument("--dataset", required=True, help="dataset.json from prepare")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="checkpoint from train")
        if predictions:
            p.add_argument("--predictions", required=True, help="date,up|down CSV")

    common(sub.add_parser("prepare", help="build the aligned dataset artifact"))
    common(sub.add_parser("train", help="train the configured model"), dataset=True)
    common(sub.add_parser("evaluate", help="walk-forward evaluation with per-fold retraining"),
           dataset=True, checkpoint=True)
    common(sub.add_parser("score", help="score externally produced predictions"),
           dataset=True, predictions=True)
    rp = sub.add_parser("report", help="combine evaluation reports into comparison tables")
    rp.add_argument("reports", nargs="+", help="report.json files from evaluate/score")
    rp.add_argument("--out", required=True, help="directory for the CSV tables")
    return parser


_COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "score": cmd_score,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
