"""Run configuration: INI parsing, validation, seed derivation, hashing.

The config file is plain key/value with sections:

    [data]
    ohlcv = prices.csv
    embeddings = articles.emb
    output_dir = out
    alignment = strict
    volatility_window = 5

    [model]
    mode = attention            ; numeric_baseline | sentiment_numeric | concat | attention
    token_source = article_tokens
    d_model = 64
    heads = 4
    dropout = 0.1
    ; d_out defaults to d_model

    [training]
    learning_rate = 0.05
    l2_lambda = 1e-4
    max_epochs = 500
    tolerance = 1e-7
    smote = false
    smote_k = 5

    [evaluation]
    strategy = tss              ; tss | time | random
    folds = 5
    train_ratio = 0.8

    [run]
    seed = 7
    label = my-run

Unknown sections or keys are rejected. One global seed deterministically
derives every per-component stream via SeedSequence([seed, component_id,
counter]) with fixed component ids (init=1, smote=2, dropout=3, shuffle=4),
so a single knob reproduces the whole pipeline.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from .errors import SchemaError

MODES = ("numeric_baseline", "sentiment_numeric", "concat", "attention")
STRATEGIES = ("tss", "time", "random")
ALIGNMENTS = ("strict", "lenient")
TOKEN_SOURCES = ("article_tokens", "pooled_single")

_COMPONENT_IDS = {"init": 1, "smote": 2, "dropout": 3, "shuffle": 4}


def derive_seed(global_seed: int, component: str, counter: int = 0) -> int:
    """Per-component seed from the global one; documented counter scheme."""
    if component not in _COMPONENT_IDS:
        raise ValueError(f"unknown seed component {component!r}")
    ss = np.random.SeedSequence([int(global_seed), _COMPONENT_IDS[component], int(counter)])
    return int(ss.generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class RunConfig:
    ohlcv: str = ""
    embeddings: str = ""
    output_dir: str = "out"
    alignment: str = "strict"
    volatility_window: int = 5
    mode: str = "concat"
    token_source: str = "article_tokens"
    d_model: int = 64
    heads: int = 4
    d_out: int | None = None
    dropout: float = 0.1
    learning_rate: float = 0.05
    l2_lambda: float = 1e-4
    max_epochs: int = 500
    tolerance: float = 1e-7
    smote: bool = False
    smote_k: int = 5
    strategy: str = "tss"
    folds: int = 5
    train_ratio: float = 0.8
    seed: int = 0
    label: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


_PARSERS = {
    ("data", "ohlcv"): ("ohlcv", str),
    ("data", "embeddings"): ("embeddings", str),
    ("data", "output_dir"): ("output_dir", str),
    ("data", "alignment"): ("alignment", str),
    ("data", "volatility_window"): ("volatility_window", int),
    ("model", "mode"): ("mode", str),
    ("model", "token_source"): ("token_source", str),
    ("model", "d_model"): ("d_model", int),
    ("model", "heads"): ("heads", int),
    ("model", "d_out"): ("d_out", int),
    ("model", "dropout"): ("dropout", float),
    ("training", "learning_rate"): ("learning_rate", float),
    ("training", "l2_lambda"): ("l2_lambda", float),
    ("training", "max_epochs"): ("max_epochs", int),
    ("training", "tolerance"): ("tolerance", float),
    ("training", "smote"): ("smote", "bool"),
    ("training", "smote_k"): ("smote_k", int),
    ("evaluation", "strategy"): ("strategy", str),
    ("evaluation", "folds"): ("folds", int),
    ("evaluation", "train_ratio"): ("train_ratio", float),
    ("run", "seed"): ("seed", int),
    ("run", "label"): ("label", str),
}

_BOOL_VALUES = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def load_config(path) -> RunConfig:
    """Parse and validate a config file; unknown keys are errors, not noise."""
    if not os.path.exists(path):
        raise SchemaError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise SchemaError(f"{path}: {exc}") from None

    values: dict = {}
    for section in parser.sections():
        for key, raw in parser[section].items():
            entry = _PARSERS.get((section, key))
            if entry is None:
                raise SchemaError(f"{path}: unknown config key [{section}] {key}")
            field, kind = entry
            raw = raw.strip()
            try:
                if kind == "bool":
                    values[field] = _BOOL_VALUES[raw.lower()]
                else:
                    values[field] = kind(raw)
            except (ValueError, KeyError):
                raise SchemaError(f"{path}: bad value for [{section}] {key}: {raw!r}") from None
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    checks = [
        (cfg.mode in MODES, f"mode must be one of {MODES}, got {cfg.mode!r}"),
        (cfg.strategy in STRATEGIES, f"strategy must be one of {STRATEGIES}, got {cfg.strategy!r}"),
        (cfg.alignment in ALIGNMENTS, f"alignment must be one of {ALIGNMENTS}, got {cfg.alignment!r}"),
        (cfg.token_source in TOKEN_SOURCES,
         f"token_source must be one of {TOKEN_SOURCES}, got {cfg.token_source!r}"),
        (cfg.volatility_window >= 2, "volatility_window must be >= 2"),
        (cfg.d_model >= 1 and cfg.heads >= 1, "d_model and heads must be >= 1"),
        (cfg.d_model % cfg.heads == 0, f"d_model {cfg.d_model} not divisible by heads {cfg.heads}"),
        (cfg.d_out is None or cfg.d_out >= 1, "d_out must be >= 1"),
        (0.0 <= cfg.dropout < 1.0, "dropout must be in [0, 1)"),
        (cfg.learning_rate > 0, "learning_rate must be > 0"),
        (cfg.l2_lambda >= 0, "l2_lambda must be >= 0"),
        (cfg.max_epochs >= 0, "max_epochs must be >= 0"),
        (cfg.tolerance > 0, "tolerance must be > 0"),
        (cfg.smote_k >= 1, "smote_k must be >= 1"),
        (cfg.folds >= 1, "folds must be >= 1"),
        (0.0 < cfg.train_ratio < 1.0, "train_ratio must be in (0, 1)"),
        (cfg.seed >= 0, "seed must be >= 0"),
        (not (cfg.smote and cfg.mode == "attention"),
         "smote is not applicable to attention mode (token sets cannot be interpolated)"),
    ]
    for ok, message in checks:
        if not ok:
            raise SchemaError(f"invalid config: {message}")


# Fields that define the trained model's identity; split strategy and paths
# deliberately excluded (evaluating the same model under another split is
# legitimate, moving files is irrelevant).
_MODEL_HASH_FIELDS = (
    "mode", "token_source", "d_model", "heads", "d_out", "dropout",
    "learning_rate", "l2_lambda", "max_epochs", "tolerance",
    "smote", "smote_k", "alignment", "volatility_window", "seed",
)


def model_config_hash(cfg: RunConfig, text_dim: int, feature_order: tuple[str, ...]) -> str:
    payload = {name: getattr(cfg, name) for name in _MODEL_HASH_FIELDS}
    payload["text_dim"] = int(text_dim)
    payload["feature_order"] = list(feature_order)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
