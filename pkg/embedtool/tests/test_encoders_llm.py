import datetime as dt
import logging

import numpy as np
import pytest

from embedtool.encoders import HashingEncoder, embed_articles
from embedtool.llm import (
    DatasetRow,
    build_prompt,
    normalize_reply,
    run_llm_baseline,
)
from embedtool.records import load_articles
from embedtool.sentiment import annotate_sentiment


class TestHashingEncoder:
    def test_deterministic(self):
        enc = HashingEncoder(dim=32)
        a = enc.encode("profits surged today", "mean")
        b = HashingEncoder(dim=32).encode("profits surged today", "mean")
        assert a.tobytes() == b.tobytes()

    def test_mean_and_cls_generally_differ(self):
        enc = HashingEncoder(dim=32)
        mean = enc.encode("profits surged today", "mean")
        cls = enc.encode("profits surged today", "cls")
        assert mean.shape == cls.shape == (32,)
        assert not np.allclose(mean, cls)

    def test_truncation_counted(self):
        enc = HashingEncoder(dim=8)
        enc.encode(" ".join(["token"] * 600), "mean")
        assert enc.truncated == 1

    def test_embed_file_has_one_row_per_article(self, corpus_path, tmp_path):
        records = load_articles(corpus_path)
        sentiments = annotate_sentiment(records, "lexicon")
        out = tmp_path / "articles.emb"
        dim = embed_articles(records, "hashing16", "mean", sentiments, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "#dim=16"
        assert len(lines) == 1 + len(records)
        assert dim == 16

    def test_bad_pooling_rejected(self, corpus_path, tmp_path):
        records = load_articles(corpus_path)[:1]
        with pytest.raises(ValueError, match="pooling"):
            embed_articles(records, "hashing8", "max", [0.0], tmp_path / "x.emb")


def _rows(n=4):
    base = dt.date(2020, 1, 6)
    rows = []
    for i in range(n):
        rows.append(
            DatasetRow(
                date=base + dt.timedelta(days=i + 1),
                prev_date=base + dt.timedelta(days=i),
                features={"open": 100.0 + i, "close": 99.0 + i},
                label=i % 2,
            )
        )
    return rows


class TestNormalization:
    @pytest.mark.parametrize(
        "reply,expected",
        [
            ("up", "up"),
            ("Up.", "up"),
            ("  DOWN!\n", "down"),
            ("'down'", "down"),
            ("sideways", None),
            ("going up probably", None),
            ("updown", None),
            ("", None),
        ],
    )
    def test_reply_normalization(self, reply, expected):
        assert normalize_reply(reply) == expected


class TestPrompts:
    def test_prompt_carries_data_and_article(self):
        row = _rows(1)[0]
        prompt = build_prompt(row, "Banks rallied.", [])
        assert "open=100" in prompt and "Banks rallied." in prompt
        assert "exactly one word" in prompt

    def test_shot_examples_prepended(self):
        rows = _rows(4)
        prompt = build_prompt(rows[3], "article", [(rows[0], "ex0"), (rows[1], "ex1")])
        assert prompt.index("ex0") < prompt.index("ex1") < prompt.index("article")
        assert prompt.count("</Answer/>:") == 3  # two answered examples + the ask


class TestRunBaseline:
    def test_happy_path_writes_all_rows(self, tmp_path):
        rows = _rows(4)
        replies = iter(["up", "Down.", "UP", "down"])
        out = tmp_path / "preds.csv"
        summary = run_llm_baseline(rows, {}, "zero", lambda prompt: next(replies), out)
        assert summary == {"written": 4, "invalid": [], "paradigm": "zero"}
        lines = out.read_text().splitlines()
        assert lines[0] == "date,prediction"
        assert lines[1] == "2020-01-07,up"
        assert lines[2] == "2020-01-08,down"

    def test_bad_reply_retried_once_then_excluded(self, tmp_path, caplog):
        rows = _rows(2)
        calls = []

        def transport(prompt):
            calls.append(prompt)
            return "sideways" if len(calls) <= 2 else "up"

        with caplog.at_level(logging.WARNING):
            summary = run_llm_baseline(rows, {}, "zero", transport, tmp_path / "p.csv")
        assert summary["written"] == 1
        assert summary["invalid"] == ["2020-01-07"]
        assert len(calls) == 3  # first row asked twice, second once
        assert "2020-01-07" in caplog.text

    def test_one_shot_uses_first_row_as_example(self, tmp_path):
        rows = _rows(3)
        prompts = []

        def transport(prompt):
            prompts.append(prompt)
            return "up"

        run_llm_baseline(rows, {rows[0].prev_date: "seed article"}, "one",
                         transport, tmp_path / "p.csv")
        assert all(p.startswith("Examples:") for p in prompts)
        assert "seed article" in prompts[0]

    def test_unknown_paradigm(self, tmp_path):
        with pytest.raises(ValueError, match="paradigm"):
            run_llm_baseline(_rows(1), {}, "many", lambda p: "up", tmp_path / "p.csv")

    def test_unreachable_endpoint_is_environment_error(self):
        from embedtool.llm import HTTPTransport

        transport = HTTPTransport("http://127.0.0.1:9/v1/chat/completions", "m", timeout=0.5)
        with pytest.raises(EnvironmentError, match="unreachable"):
            transport("hello")
