import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from marketfuse.errors import DataError, EmptyDatasetError, InsufficientDataError, SchemaError
from marketfuse.ingest import (
    DailyBar,
    FeatureTable,
    align,
    apply_lag,
    build_market_rows,
    compute_movement,
    load_ohlcv,
    quality_report,
)
from marketfuse.textfeat import ArticleEmbedding, aggregate_day


def _bar(day, open_, high, close, volume=100.0):
    return DailyBar(dt.date(2020, 1, day), open_, high, close, volume)


def _write(tmp_path, text, name="prices.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadOhlcv:
    def test_two_rows_parse_in_order(self, tmp_path):
        path = _write(
            tmp_path,
            "date,open,high,close,volume\n"
            "2020-01-02,100,101,100.5,1000\n"
            "2020-01-03,101,102,101.5,900\n",
        )
        bars = load_ohlcv(path)
        assert len(bars) == 2
        assert bars[0] == DailyBar(dt.date(2020, 1, 2), 100.0, 101.0, 100.5, 1000.0)
        assert bars[1].date == dt.date(2020, 1, 3)

    def test_swapped_dates_name_the_line(self, tmp_path):
        path = _write(
            tmp_path,
            "date,open,high,close,volume\n"
            "2020-01-03,101,102,101.5,900\n"
            "2020-01-02,100,101,100.5,1000\n",
        )
        with pytest.raises(DataError, match="line 3"):
            load_ohlcv(path)

    def test_duplicate_date_rejected(self, tmp_path):
        path = _write(
            tmp_path,
            "date,open,high,close,volume\n"
            "2020-01-02,100,101,100.5,1000\n"
            "2020-01-02,101,102,101.5,900\n",
        )
        with pytest.raises(DataError, match="duplicate"):
            load_ohlcv(path)

    def test_bad_volume_names_the_line(self, tmp_path):
        path = _write(
            tmp_path,
            "date,open,high,close,volume\n2020-01-02,100,101,100.5,abc\n",
        )
        with pytest.raises(DataError, match="line 2"):
            load_ohlcv(path)

    def test_missing_column_is_schema_error(self, tmp_path):
        path = _write(tmp_path, "date,open,high,close\n2020-01-02,100,101,100.5\n")
        with pytest.raises(SchemaError, match="header"):
            load_ohlcv(path)

    def test_non_positive_price_rejected(self, tmp_path):
        path = _write(tmp_path, "date,open,high,close,volume\n2020-01-02,0,101,100.5,10\n")
        with pytest.raises(DataError, match="open"):
            load_ohlcv(path)

    def test_fixture_file_loads(self, tiny_ohlcv_path):
        bars = load_ohlcv(tiny_ohlcv_path)
        assert len(bars) == 12
        dates = [b.date for b in bars]
        assert dates == sorted(dates)


class TestQualityReport:
    def test_high_below_body_flagged_not_repaired(self):
        bars = [_bar(2, 100, 101.5, 102), _bar(3, 100, 103, 101)]
        report = quality_report(bars)
        assert report["anomaly_count"] == 1
        assert report["anomalies"][0]["kind"] == "high_below_body"
        assert report["anomalies"][0]["date"] == "2020-01-02"
        assert bars[0].high == 101.5  # untouched

    def test_fixture_has_the_planted_anomaly(self, tiny_ohlcv_path):
        report = quality_report(load_ohlcv(tiny_ohlcv_path))
        kinds = {a["date"]: a["kind"] for a in report["anomalies"]}
        assert kinds == {"2020-01-15": "high_below_body"}


class TestComputeMovement:
    def test_up_down_and_tie(self):
        bars = [
            _bar(2, 100, 103, 100),  # prior close 100
            _bar(3, 102, 104, 100),  # movement +2 -> Up
            _bar(6, 100, 104, 100),  # movement 0 -> Down (tie rule)
            _bar(7, 99, 104, 100),   # movement -1 -> Down
        ]
        labels = compute_movement(bars)
        assert [(m.movement, m.label) for m in labels] == [(2.0, 1), (0.0, 0), (-1.0, 0)]
        assert [m.date.day for m in labels] == [3, 6, 7]

    def test_needs_two_bars(self):
        with pytest.raises(InsufficientDataError):
            compute_movement([_bar(2, 100, 101, 100)])

    @given(
        st.lists(
            st.tuples(
                st.floats(1.0, 1000.0, allow_nan=False),
                st.floats(1.0, 1000.0, allow_nan=False),
            ),
            min_size=2,
            max_size=20,
        ),
        st.floats(0.01, 100.0, allow_nan=False),
    )
    def test_labels_scale_invariant_and_length_contract(self, oc_pairs, scale):
        bars = [
            DailyBar(dt.date(2020, 1, 1) + dt.timedelta(days=i), o, max(o, c) + 1, c, 10.0)
            for i, (o, c) in enumerate(oc_pairs)
        ]
        scaled = [
            DailyBar(b.date, b.open * scale, b.high * scale, b.close * scale, b.volume)
            for b in bars
        ]
        out = compute_movement(bars)
        out_scaled = compute_movement(scaled)
        assert len(out) == len(bars) - 1
        assert [m.label for m in out] == [m.label for m in out_scaled]


class TestApplyLag:
    def test_non_exempt_column_shifts(self):
        table = FeatureTable(
            dates=(dt.date(2020, 1, 2), dt.date(2020, 1, 3), dt.date(2020, 1, 6)),
            columns={"volume": np.array([1.0, 2.0, 3.0])},
        )
        lagged = apply_lag(table, lag=1)
        assert lagged.dates == (dt.date(2020, 1, 3), dt.date(2020, 1, 6))
        assert lagged.columns["volume"].tolist() == [1.0, 2.0]

    def test_exempt_column_keeps_day_t(self):
        table = FeatureTable(
            dates=(dt.date(2020, 1, 2), dt.date(2020, 1, 3), dt.date(2020, 1, 6)),
            columns={"open": np.array([10.0, 20.0, 30.0])},
        )
        lagged = apply_lag(table, lag=1, exempt={"open"})
        assert lagged.columns["open"].tolist() == [20.0, 30.0]

    def test_too_short_table(self):
        table = FeatureTable(
            dates=(dt.date(2020, 1, 2), dt.date(2020, 1, 3)),
            columns={"x": np.array([1.0, 2.0])},
        )
        with pytest.raises(InsufficientDataError):
            apply_lag(table, lag=2)

    def test_unknown_exempt_column(self):
        table = FeatureTable(dates=(dt.date(2020, 1, 2),) * 1, columns={"x": np.array([1.0])})
        with pytest.raises(ValueError, match="exempt"):
            apply_lag(table, lag=1, exempt={"nope"})

    def test_anti_leakage_with_distinct_values(self):
        n = 8
        dates = tuple(dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(n))
        table = FeatureTable(
            dates=dates,
            columns={
                "a": np.arange(n, dtype=float) * 10,
                "b": np.arange(n, dtype=float) + 100,
                "open": np.arange(n, dtype=float) + 1000,
            },
        )
        lagged = apply_lag(table, lag=1, exempt={"open"})
        raw_a = {d: v for d, v in zip(dates, table.columns["a"])}
        raw_open = {d: v for d, v in zip(dates, table.columns["open"])}
        for i, date in enumerate(lagged.dates):
            prev = dates[dates.index(date) - 1]
            assert lagged.columns["a"][i] == raw_a[prev]
            assert lagged.columns["open"][i] == raw_open[date]


def _article(day, art_id="a", value=0.5):
    return ArticleEmbedding(dt.date(2020, 1, day), art_id, np.array([value, -value]), 0.25)


def _market_rows():
    bars = [
        _bar(2, 100, 103, 101),
        _bar(3, 102, 104, 100),
        _bar(6, 101, 104, 102),
        _bar(7, 99, 104, 100),
        _bar(8, 101, 104, 103),
        _bar(9, 102, 104, 101),
        _bar(10, 102, 104, 105),
    ]
    return build_market_rows(bars, volatility_window=2)


class TestAlign:
    def test_row_pairs_previous_day_text(self):
        rows = _market_rows()
        texts = {r.prev_date: aggregate_day([_article(r.prev_date.day)]) for r in rows}
        aligned = align(rows, texts, mode="strict")
        assert len(aligned) == len(rows)
        for out in aligned:
            assert out.text.date == out.prev_date
            assert not out.no_news

    def test_strict_drops_days_without_prior_news(self):
        rows = _market_rows()
        texts = {rows[0].prev_date: aggregate_day([_article(rows[0].prev_date.day)])}
        aligned = align(rows, texts, mode="strict")
        assert [r.date for r in aligned] == [rows[0].date]

    def test_lenient_substitutes_zero_text_and_flags(self):
        rows = _market_rows()
        texts = {rows[0].prev_date: aggregate_day([_article(rows[0].prev_date.day)])}
        aligned = align(rows, texts, mode="lenient")
        assert len(aligned) == len(rows)
        flagged = [r for r in aligned if r.no_news]
        assert len(flagged) == len(rows) - 1
        for r in flagged:
            assert r.x_raw[1] == 0.0 and r.x_raw[2] == 0.0  # sentiment stats zeroed
            assert np.all(r.text.mean_embedding == 0.0)
            assert len(r.text.tokens) == 1

    def test_empty_intersection_is_empty_dataset_error(self):
        rows = _market_rows()
        texts = {dt.date(1999, 1, 1): aggregate_day([_article(2)])}
        with pytest.raises(EmptyDatasetError):
            align(rows, texts, mode="strict")

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            align(_market_rows(), {}, mode="loose")


class TestBuildMarketRows:
    def test_feature_lagging_end_to_end(self):
        bars = [
            _bar(2, 10.0, 11.0, 12.0, 100),
            _bar(3, 20.0, 21.0, 22.0, 200),
            _bar(6, 30.0, 31.0, 32.0, 300),
            _bar(7, 40.0, 41.0, 42.0, 400),
            _bar(8, 50.0, 51.0, 52.0, 500),
        ]
        rows = build_market_rows(bars, volatility_window=2)
        # window=2 needs returns at t-1 and a lag: first row is bars[3]
        assert [r.date.day for r in rows] == [7, 8]
        first = rows[0]
        assert first.open == 40.0          # day t, exempt
        assert first.close == 32.0         # day t-1
        assert first.high == 31.0
        assert first.volume == 300.0
        np.testing.assert_allclose(first.daily_return, (32.0 - 22.0) / 22.0)
        assert first.prev_date == dt.date(2020, 1, 6)
        assert first.label == (1 if first.movement > 0 else 0)
        np.testing.assert_allclose(first.realized_return, (42.0 - 40.0) / 40.0)

    def test_insufficient_bars(self):
        bars = [_bar(2, 10, 11, 12), _bar(3, 10, 11, 12), _bar(6, 10, 11, 12)]
        with pytest.raises(InsufficientDataError):
            build_market_rows(bars, volatility_window=2)
