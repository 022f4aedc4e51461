"""Per-article news embeddings and their per-day aggregates.

Embedding file format (one file per encoder model):

    #dim=<d>
    date,article_id,sentiment,v1 v2 ... vd

Line 1 declares the embedding dimension. Every following line is CSV with
the vector serialized as a single space-separated field. Dates are
ISO-8601, numbers use a decimal point, encoding is UTF-8.

Daily aggregation is the arithmetic mean over that day's articles. To keep
results bitwise-stable under input reordering, all reductions sum
contributions in article_id order (float addition is order-sensitive).
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, SchemaError

_DIM_PREFIX = "#dim="


@dataclass(frozen=True)
class ArticleEmbedding:
    """One news article: publication date, embedding vector, sentiment score.

    The sentiment scalar lives in [-1, 1]; upstream annotators that emit
    class probabilities map to it as P(positive) - P(negative).
    """

    date: dt.date
    article_id: str
    vector: np.ndarray
    sentiment: float


@dataclass(frozen=True)
class DayText:
    """All text-derived features for a single date.

    tokens keeps the individual article vectors in file order (they feed
    cross-modal attention); mean_embedding, agg_sentiment and
    sentiment_volatility are the pooled statistics. sentiment_volatility
    is the population (divide-by-N) standard deviation, so a single-article
    day has volatility exactly 0.
    """

    date: dt.date
    tokens: tuple[np.ndarray, ...]
    mean_embedding: np.ndarray
    agg_sentiment: float
    sentiment_volatility: float


def load_embeddings(path) -> list[ArticleEmbedding]:
    """Parse an embedding file, validating dimension, range and uniqueness."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith(_DIM_PREFIX):
            raise SchemaError(f"{path}: line 1 must be '{_DIM_PREFIX}<int>', got {first!r}")
        try:
            dim = int(first[len(_DIM_PREFIX):])
        except ValueError:
            raise SchemaError(f"{path}: bad dimension declaration {first!r}") from None
        if dim < 1:
            raise SchemaError(f"{path}: dimension must be >= 1, got {dim}")

        articles: list[ArticleEmbedding] = []
        seen: set[tuple[dt.date, str]] = set()
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row:
                continue
            if len(row) != 4:
                raise SchemaError(f"{path}:{lineno}: expected 4 CSV fields, got {len(row)}")
            date_s, article_id, sentiment_s, vector_s = row
            try:
                date = dt.date.fromisoformat(date_s.strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad date {date_s!r}") from None
            try:
                sentiment = float(sentiment_s)
                components = [float(tok) for tok in vector_s.split()]
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparseable number") from None
            if len(components) != dim:
                raise SchemaError(
                    f"{path}:{lineno}: expected {dim} vector components, got {len(components)}"
                )
            if not np.isfinite(sentiment) or not (-1.0 <= sentiment <= 1.0):
                raise SchemaError(f"{path}:{lineno}: sentiment {sentiment} outside [-1, 1]")
            vector = np.asarray(components, dtype=np.float64)
            if not np.all(np.isfinite(vector)):
                raise SchemaError(f"{path}:{lineno}: non-finite vector component")
            key = (date, article_id)
            if key in seen:
                raise DataError(f"{path}:{lineno}: duplicate (date, article_id) {key}")
            seen.add(key)
            articles.append(ArticleEmbedding(date, article_id, vector, sentiment))
    return articles


def write_embeddings(path, dim: int, articles: Iterable[ArticleEmbedding]) -> None:
    """Write articles in the same format load_embeddings parses."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{_DIM_PREFIX}{dim}\n")
        writer = csv.writer(fh)
        for art in articles:
            if art.vector.shape != (dim,):
                raise ValueError(f"article {art.article_id}: vector shape {art.vector.shape} != ({dim},)")
            writer.writerow(
                [art.date.isoformat(), art.article_id, repr(float(art.sentiment)),
                 " ".join(repr(float(v)) for v in art.vector)]
            )


def aggregate_day(articles: Sequence[ArticleEmbedding]) -> DayText:
    """Pool one date's articles into a DayText.

    Sums run in article_id order regardless of input order, so the pooled
    statistics are bitwise-identical under permutation while `tokens`
    preserves the given order.
    """
    if not articles:
        raise ValueError("aggregate_day needs at least one article")
    dates = {a.date for a in articles}
    if len(dates) != 1:
        raise ValueError(f"aggregate_day got mixed dates: {sorted(d.isoformat() for d in dates)}")
    date = articles[0].date

    by_id = sorted(articles, key=lambda a: a.article_id)
    vectors = np.stack([a.vector for a in by_id])
    sentiments = np.asarray([a.sentiment for a in by_id], dtype=np.float64)
    # exact zero when all sentiments coincide, despite rounding in the mean
    volatility = 0.0 if np.all(sentiments == sentiments[0]) else float(sentiments.std())
    return DayText(
        date=date,
        tokens=tuple(a.vector for a in articles),
        mean_embedding=vectors.mean(axis=0),
        agg_sentiment=float(sentiments.mean()),
        sentiment_volatility=volatility,
    )


def aggregate_by_date(articles: Sequence[ArticleEmbedding]) -> dict[dt.date, DayText]:
    """Group articles by date (keeping file order within a day) and aggregate each."""
    grouped: dict[dt.date, list[ArticleEmbedding]] = {}
    for art in articles:
        grouped.setdefault(art.date, []).append(art)
    return {date: aggregate_day(arts) for date, arts in grouped.items()}


def zero_day_text(date: dt.date, dim: int) -> DayText:
    """Placeholder for days without news: one all-zero token, zero statistics."""
    zero = np.zeros(dim, dtype=np.float64)
    return DayText(date=date, tokens=(zero,), mean_embedding=zero.copy(),
                   agg_sentiment=0.0, sentiment_volatility=0.0)
