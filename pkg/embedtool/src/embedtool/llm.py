"""Frozen-LLM baseline: prompt an endpoint for daily up/down calls.

Reads the fusion engine's dataset artifact (dataset.json) for the dates and
numeric features, pairs each day with the previous trading day's article
text, and asks the model for exactly one word. Replies are normalized
case-insensitively with surrounding punctuation stripped; anything else is
re-asked once and then marked invalid (logged and excluded from the output
file).

Output format (scored by the fusion engine's `score` command):

    date,prediction
    2020-01-03,up
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .records import ArticleRecord

logger = logging.getLogger(__name__)

PARADIGMS = ("zero", "one", "few")
_FEW_SHOT_EXAMPLES = {"zero": 0, "one": 1, "few": 3}
_ANSWER_RE = re.compile(r"^[\s'\"`.,:;!()\[\]-]*(up|down)[\s'\"`.,:;!()\[\]-]*$", re.IGNORECASE)

PROMPT_TEMPLATE = (
    "Based on the numerical data and the news article from yesterday, determine "
    "if today's stock will move 'up' or 'down'. Respond with exactly one word: "
    "either 'up' or 'down'. Do not include any additional text or echo any part "
    "of this prompt.\n\n"
    "<Numerical Data>: {numerical_data}\n\n"
    "<News Article>: {news_article}\n\n"
    "</Answer/>:"
)

_MAX_ARTICLE_CHARS = 2000


@dataclass(frozen=True)
class DatasetRow:
    date: dt.date
    prev_date: dt.date
    features: dict[str, float]
    label: int


def load_dataset_rows(path) -> list[DatasetRow]:
    """Read the engine's dataset.json (its documented artifact schema)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    order = doc["feature_order"]
    rows = []
    for rj in doc["rows"]:
        rows.append(
            DatasetRow(
                date=dt.date.fromisoformat(rj["date"]),
                prev_date=dt.date.fromisoformat(rj["prev_date"]),
                features=dict(zip(order, rj["x_raw"])),
                label=int(rj["label"]),
            )
        )
    return rows


def articles_by_date(records: Sequence[ArticleRecord]) -> dict[dt.date, str]:
    """Concatenate each day's article texts (file order), capped per prompt."""
    grouped: dict[dt.date, list[str]] = {}
    for rec in records:
        grouped.setdefault(rec.date, []).append(rec.text)
    return {date: " | ".join(texts)[:_MAX_ARTICLE_CHARS] for date, texts in grouped.items()}


def build_prompt(row: DatasetRow, article: str, examples: Sequence[tuple[DatasetRow, str]]) -> str:
    numerical = ", ".join(f"{name}={value:.6g}" for name, value in row.features.items())
    prompt = PROMPT_TEMPLATE.format(numerical_data=numerical, news_article=article or "(no news)")
    if not examples:
        return prompt
    blocks = []
    for ex_row, ex_article in examples:
        ex_numerical = ", ".join(f"{n}={v:.6g}" for n, v in ex_row.features.items())
        answer = "up" if ex_row.label == 1 else "down"
        blocks.append(
            f"<Numerical Data>: {ex_numerical}\n<News Article>: {ex_article or '(no news)'}\n"
            f"</Answer/>: {answer}"
        )
    return "Examples:\n\n" + "\n\n".join(blocks) + "\n\n" + prompt


def normalize_reply(reply: str) -> str | None:
    match = _ANSWER_RE.match(reply.strip())
    return match.group(1).lower() if match else None


class HTTPTransport:
    """OpenAI-style chat-completions client; any {url, model} pair works."""

    def __init__(self, url: str, model: str, api_key: str = "", timeout: float = 60.0):
        import httpx

        self._url = url
        self._model = model
        self._headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout)

    def __call__(self, prompt: str) -> str:
        import httpx

        try:
            response = self._client.post(
                self._url,
                headers=self._headers,
                json={
                    "model": self._model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": 0.0,
                },
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise EnvironmentError(f"LLM endpoint unreachable: {exc}") from exc
        return response.json()["choices"][0]["message"]["content"]


def run_llm_baseline(
    rows: Sequence[DatasetRow],
    day_articles: Mapping[dt.date, str],
    paradigm: str,
    transport: Callable[[str], str],
    out_path,
) -> dict:
    """Query the model for every row and write the prediction file.

    Non-conforming replies are re-asked once, then marked invalid: the date
    is logged, excluded from the file, and counted in the returned summary.
    """
    if paradigm not in PARADIGMS:
        raise ValueError(f"paradigm must be one of {PARADIGMS}, got {paradigm!r}")
    n_examples = _FEW_SHOT_EXAMPLES[paradigm]
    examples = [(row, day_articles.get(row.prev_date, "")) for row in rows[:n_examples]]

    predictions: list[tuple[dt.date, str]] = []
    invalid: list[str] = []
    for row in rows:
        prompt = build_prompt(row, day_articles.get(row.prev_date, ""), examples)
        answer = normalize_reply(transport(prompt))
        if answer is None:
            answer = normalize_reply(transport(prompt))  # one retry
        if answer is None:
            invalid.append(row.date.isoformat())
            logger.warning("invalid reply for %s after retry; row excluded", row.date.isoformat())
            continue
        predictions.append((row.date, answer))

    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "prediction"])
        for date, answer in predictions:
            writer.writerow([date.isoformat(), answer])
    return {"written": len(predictions), "invalid": invalid, "paradigm": paradigm}
