"""Per-article sentiment annotation.

Two backends behind one model-name string:

- "lexicon": a built-in weighted financial term list, fully offline and
  deterministic. Scores are squashed with tanh, so they always land in
  [-1, 1].
- any other name is treated as a Hugging Face text-classification model;
  the scalar is P(positive) - P(negative) from the classifier head, which
  maps a 3-class head monotonically onto [-1, 1]. Inference runs in eval
  mode, so repeated calls give identical scores.
"""

from __future__ import annotations

import math
from typing import Sequence

from .records import ArticleRecord

_POSITIVE = {
    "beat": 2.0, "beats": 2.0, "record": 1.5, "rally": 2.0, "rallied": 2.0,
    "surge": 2.0, "surged": 2.0, "gain": 1.0, "gains": 1.0, "strong": 1.0,
    "growth": 1.0, "profit": 1.0, "profits": 1.0, "upgrade": 2.0,
    "upgraded": 2.0, "expansion": 1.5, "bullish": 2.0, "soar": 2.5,
    "soared": 2.5, "optimistic": 1.5, "improved": 1.0, "improves": 1.0,
    "outperform": 2.0, "raise": 1.0, "raised": 1.0,
}
_NEGATIVE = {
    "miss": -2.0, "missed": -2.0, "losses": -1.5, "loss": -1.5, "weak": -1.0,
    "decline": -1.0, "declined": -1.0, "downgrade": -2.0, "downgraded": -2.0,
    "bearish": -2.0, "plunge": -2.5, "plunged": -2.5, "slump": -2.0,
    "slumped": -2.0, "warning": -1.5, "bankruptcy": -3.0, "impairment": -2.0,
    "lawsuit": -1.5, "recall": -1.5, "layoffs": -2.0, "crash": -2.5,
    "fears": -1.0, "selloff": -2.0, "cut": -1.0,
}


def _lexicon_score(text: str) -> float:
    score = 0.0
    for token in text.lower().replace(",", " ").replace(".", " ").split():
        score += _POSITIVE.get(token, 0.0) + _NEGATIVE.get(token, 0.0)
    return math.tanh(score / 3.0)


class _HFScorer:
    def __init__(self, model_name: str):
        try:
            from transformers import pipeline
        except ImportError as exc:
            raise EnvironmentError(f"transformers not installed; cannot load {model_name!r}") from exc
        try:
            self._pipe = pipeline("text-classification", model=model_name, top_k=None)
        except Exception as exc:
            raise EnvironmentError(f"failed to load sentiment model {model_name!r}: {exc}") from exc

    def score(self, texts: Sequence[str]) -> list[float]:
        out = []
        for result in self._pipe(list(texts), truncation=True):
            by_label = {entry["label"].lower(): entry["score"] for entry in result}
            pos = by_label.get("positive", by_label.get("pos", 0.0))
            neg = by_label.get("negative", by_label.get("neg", 0.0))
            out.append(max(-1.0, min(1.0, pos - neg)))
        return out


def annotate_sentiment(records: Sequence[ArticleRecord], model_name: str = "lexicon") -> list[float]:
    """Score each article in [-1, 1]; order follows the input."""
    for rec in records:
        if not rec.content.strip():
            raise ValueError(f"article {rec.article_id}: empty content")
    if model_name == "lexicon":
        return [_lexicon_score(rec.text) for rec in records]
    scorer = _HFScorer(model_name)
    return scorer.score([rec.text for rec in records])
