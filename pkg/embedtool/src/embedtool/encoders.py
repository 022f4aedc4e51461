"""Sentence embeddings and the `#dim=` embedding-file writer.

Encoders behind one name string:

- "hashing" (and "hashing<d>", e.g. "hashing128"): an offline feature-hash
  encoder. Each token lands in a bucket chosen by a stable blake2b digest
  with a +-1 sign bit; "mean" pooling averages token vectors, "cls" derives
  a single whole-text digest vector. No model downloads, fully
  deterministic, any dimension.
- any other name is a Hugging Face encoder loaded lazily via transformers;
  pooling is "cls" (first token's last hidden state) or "mean" (attention-
  masked average over tokens).

Inputs longer than the token budget are truncated; the count of truncated
articles is logged once per run.

Output format (consumed by the fusion engine):

    #dim=<d>
    date,article_id,sentiment,v1 v2 ... vd
"""

from __future__ import annotations

import csv
import hashlib
import logging
from typing import Sequence

import numpy as np

from .records import ArticleRecord

logger = logging.getLogger(__name__)

POOLINGS = ("cls", "mean")
_HASH_MAX_TOKENS = 512


def _hash_token(token: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "big")
    return value % dim, 1.0 if (value >> 63) & 1 else -1.0


class HashingEncoder:
    """Deterministic bag-of-hashed-tokens encoder; no model files needed."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.truncated = 0

    def encode(self, text: str, pooling: str) -> np.ndarray:
        tokens = text.lower().split()
        if len(tokens) > _HASH_MAX_TOKENS:
            tokens = tokens[:_HASH_MAX_TOKENS]
            self.truncated += 1
        if pooling == "cls":
            # one digest over the full (truncated) text, expanded to dim values
            seed = int.from_bytes(
                hashlib.blake2b(" ".join(tokens).encode("utf-8"), digest_size=8).digest(), "big"
            )
            vec = np.random.default_rng(seed).normal(size=self.dim)
            return vec / np.linalg.norm(vec)
        acc = np.zeros(self.dim)
        for token in tokens:
            idx, sign = _hash_token(token, self.dim)
            acc[idx] += sign
        n = max(len(tokens), 1)
        return acc / n


class HFEncoder:
    def __init__(self, model_name: str):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EnvironmentError(f"transformers/torch not installed; cannot load {model_name!r}") from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_name)
            self._model = AutoModel.from_pretrained(model_name)
        except Exception as exc:
            raise EnvironmentError(f"failed to load encoder {model_name!r}: {exc}") from exc
        self._torch = torch
        self._model.eval()
        self.dim = int(self._model.config.hidden_size)
        self.truncated = 0

    def encode(self, text: str, pooling: str) -> np.ndarray:
        torch = self._torch
        full_len = len(self._tokenizer(text, truncation=False)["input_ids"])
        batch = self._tokenizer(text, truncation=True, return_tensors="pt")
        if full_len > batch["input_ids"].shape[1]:
            self.truncated += 1
        with torch.no_grad():
            states = self._model(**batch).last_hidden_state[0]
        if pooling == "cls":
            return states[0].numpy().astype(np.float64)
        mask = batch["attention_mask"][0].unsqueeze(-1)
        pooled = (states * mask).sum(dim=0) / mask.sum()
        return pooled.numpy().astype(np.float64)


def make_encoder(encoder_name: str):
    if encoder_name.startswith("hashing"):
        suffix = encoder_name[len("hashing"):]
        return HashingEncoder(dim=int(suffix) if suffix else 64)
    return HFEncoder(encoder_name)


def embed_articles(
    records: Sequence[ArticleRecord],
    encoder_name: str,
    pooling: str,
    sentiments: Sequence[float],
    out_path,
) -> int:
    """Encode every article and write the embedding file; returns the dim."""
    if pooling not in POOLINGS:
        raise ValueError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
    if len(sentiments) != len(records):
        raise ValueError(f"{len(sentiments)} sentiments for {len(records)} records")
    encoder = make_encoder(encoder_name)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#dim={encoder.dim}\n")
        writer = csv.writer(fh)
        for rec, sentiment in zip(records, sentiments):
            if not (-1.0 <= sentiment <= 1.0):
                raise ValueError(f"article {rec.article_id}: sentiment {sentiment} outside [-1, 1]")
            vec = encoder.encode(rec.text, pooling)
            if vec.shape != (encoder.dim,) or not np.all(np.isfinite(vec)):
                raise ValueError(f"article {rec.article_id}: bad embedding from {encoder_name!r}")
            writer.writerow(
                [rec.date.isoformat(), rec.article_id, repr(float(sentiment)),
                 " ".join(repr(float(v)) for v in vec)]
            )
    if encoder.truncated:
        logger.warning("%d article(s) exceeded the token budget and were truncated", encoder.truncated)
    return encoder.dim
