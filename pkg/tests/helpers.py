"""Shared test helpers (kept out of conftest so imports stay unambiguous)."""

import os

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def write_config(path, **overrides):
    """Write a minimal INI config; overrides are (section, key) -> value."""
    sections = {
        "data": {
            "ohlcv": overrides.pop("ohlcv", ""),
            "embeddings": overrides.pop("embeddings", ""),
            "output_dir": overrides.pop("output_dir", "out"),
            "alignment": overrides.pop("alignment", "strict"),
            "volatility_window": overrides.pop("volatility_window", 5),
        },
        "model": {
            "mode": overrides.pop("mode", "concat"),
            "token_source": overrides.pop("token_source", "article_tokens"),
            "d_model": overrides.pop("d_model", 16),
            "heads": overrides.pop("heads", 2),
            "dropout": overrides.pop("dropout", 0.0),
        },
        "training": {
            "learning_rate": overrides.pop("learning_rate", 0.05),
            "l2_lambda": overrides.pop("l2_lambda", 1e-4),
            "max_epochs": overrides.pop("max_epochs", 200),
            "tolerance": overrides.pop("tolerance", 1e-7),
            "smote": overrides.pop("smote", "false"),
            "smote_k": overrides.pop("smote_k", 5),
        },
        "evaluation": {
            "strategy": overrides.pop("strategy", "tss"),
            "folds": overrides.pop("folds", 5),
            "train_ratio": overrides.pop("train_ratio", 0.8),
        },
        "run": {
            "seed": overrides.pop("seed", 7),
            "label": overrides.pop("label", "test-run"),
        },
    }
    if overrides:
        raise KeyError(f"unknown config override(s): {sorted(overrides)}")
    with open(path, "w", encoding="utf-8") as fh:
        for section, values in sections.items():
            fh.write(f"[{section}]\n")
            for key, value in values.items():
                fh.write(f"{key} = {value}\n")
            fh.write("\n")
    return path
