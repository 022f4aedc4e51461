import datetime as dt

import pytest

from embedtool.records import ArticleRecord, load_articles
from embedtool.sentiment import annotate_sentiment


class TestRecords:
    def test_fixture_corpus_loads(self, corpus_path):
        records = load_articles(corpus_path)
        assert len(records) == 13
        assert records[0].article_id == "a1"
        assert records[0].date == dt.date(2020, 1, 2)
        assert "record profits" in records[0].content

    def test_empty_content_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,article_id,title,tag,content\n2020-01-02,a1,T,news,\n")
        with pytest.raises(ValueError, match="empty content"):
            load_articles(path)

    def test_bad_date_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,article_id,title,tag,content\nnot-a-date,a1,T,news,X\n")
        with pytest.raises(ValueError, match="line 2"):
            load_articles(path)

    def test_duplicate_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "date,article_id,title,tag,content\n"
            "2020-01-02,a1,T,news,X\n2020-01-02,a1,T,news,Y\n"
        )
        with pytest.raises(ValueError, match="duplicate"):
            load_articles(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("title,content\nT,X\n")
        with pytest.raises(ValueError, match="header"):
            load_articles(path)


class TestLexiconSentiment:
    def test_all_scores_in_range(self, corpus_path):
        scores = annotate_sentiment(load_articles(corpus_path), "lexicon")
        assert all(-1.0 <= s <= 1.0 for s in scores)

    def test_polarity_on_fixtures(self):
        positive = ArticleRecord(dt.date(2020, 1, 2), "p", "", "news",
                                 "Record profits and strong growth, shares surged after upgrade.")
        negative = ArticleRecord(dt.date(2020, 1, 2), "n", "", "news",
                                 "Shares plunged on bankruptcy fears, downgrade and heavy losses.")
        pos_score, neg_score = annotate_sentiment([positive, negative], "lexicon")
        assert pos_score > 0.0
        assert neg_score < 0.0

    def test_same_record_scores_identically(self):
        rec = ArticleRecord(dt.date(2020, 1, 2), "p", "T", "news", "Strong growth and profits.")
        a = annotate_sentiment([rec], "lexicon")[0]
        b = annotate_sentiment([rec], "lexicon")[0]
        assert a == b

    def test_hf_backend_missing_model_is_environment_error(self):
        rec = ArticleRecord(dt.date(2020, 1, 2), "p", "T", "news", "Strong growth.")
        with pytest.raises(EnvironmentError):
            annotate_sentiment([rec], "definitely/not-a-model-anywhere")
