"""Tests for panel ingestion, alignment, and return conversion."""

import numpy as np
import pandas as pd
import pytest

from fieldbt.data import (
    BENCHMARK_NAMES,
    excess_returns,
    load_panel,
    make_calendar,
    to_returns,
)
from fieldbt.errors import DataError
from fieldbt.synth import SynthConfig, generate_synthetic_panel


def _write(path, text):
    path.write_text(text)
    return str(path)


def _benchmark_rows(dates, level=100.0):
    rows = []
    for i, d in enumerate(dates):
        for name in BENCHMARK_NAMES:
            if name == "Y10":
                rows.append(f"{d},{name},{0.02 + 0.0001 * i}")
            else:
                rows.append(f"{d},{name},{level + i}")
    return rows


def _simple_files(tmp_path, dates, price_rows):
    prices = _write(tmp_path / "prices.csv", "date,asset_id,close\n" + "\n".join(price_rows) + "\n")
    fund_lines = ["date,asset_id,cap,mtb,ev,div_yield,ebitda"]
    assets = sorted({r.split(",")[1] for r in price_rows})
    for a in assets:
        fund_lines.append(f"{dates[0]},{a},1e9,2.0,1.1e9,0.02,1e8")
    fundamentals = _write(tmp_path / "fundamentals.csv", "\n".join(fund_lines) + "\n")
    benchmarks = _write(
        tmp_path / "benchmarks.csv",
        "date,name,close\n" + "\n".join(_benchmark_rows(dates)) + "\n",
    )
    riskfree = _write(
        tmp_path / "riskfree.csv",
        "date,annual_yield\n" + "\n".join(f"{d},0.02" for d in dates) + "\n",
    )
    return prices, fundamentals, benchmarks, riskfree


class TestToReturns:
    def test_hand_arithmetic(self):
        out = to_returns([100.0, 110.0, 99.0])
        assert out == pytest.approx([0.10, -0.10], abs=1e-15)

    def test_constant_series(self):
        assert to_returns([5.0, 5.0, 5.0]) == pytest.approx([0.0, 0.0], abs=1e-18)

    def test_matches_ratio_oracle(self):
        rng = np.random.default_rng(31)
        prices = np.exp(np.cumsum(rng.normal(0, 0.01, size=252))) * 50
        out = to_returns(prices)
        oracle = np.array([prices[i + 1] / prices[i] - 1 for i in range(251)])
        assert np.max(np.abs(out - oracle)) <= 1e-15

    def test_series_keeps_index(self):
        idx = pd.bdate_range("2020-01-01", periods=4)
        s = pd.Series([1.0, 2.0, 4.0, 8.0], index=idx, name="X")
        out = to_returns(s)
        assert list(out.index) == list(idx[1:])
        assert out.name == "X"

    def test_too_few_points(self):
        with pytest.raises(DataError):
            to_returns([100.0])

    def test_round_trip_compounding(self):
        rng = np.random.default_rng(32)
        prices = np.exp(np.cumsum(rng.normal(0, 0.02, size=500))) * 30
        rets = to_returns(prices)
        rebuilt = prices[0] * np.cumprod(1.0 + rets)
        assert np.max(np.abs(rebuilt / prices[1:] - 1.0)) <= 1e-10


class TestExcessReturns:
    def test_flat_yield(self):
        out = excess_returns([0.001] * 5, [0.0252] * 5)
        assert out == pytest.approx([0.0009] * 5, abs=1e-15)

    def test_zero_yield_identity(self):
        rng = np.random.default_rng(33)
        r = rng.normal(0, 0.01, size=100)
        assert np.array_equal(excess_returns(r, np.zeros(100)), r)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(34)
        r = rng.normal(0, 0.01, size=252)
        y = rng.uniform(0.0, 0.05, size=252)
        out = excess_returns(r, y)
        oracle = np.array([r[i] - y[i] / 252 for i in range(252)])
        assert np.max(np.abs(out - oracle)) <= 1e-15

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            excess_returns([0.01, 0.02], [0.02])


class TestMakeCalendar:
    def test_rejects_duplicates(self):
        with pytest.raises(DataError):
            make_calendar(["2020-01-01", "2020-01-01"])

    def test_rejects_unordered(self):
        with pytest.raises(DataError):
            make_calendar(["2020-01-02", "2020-01-01"])


class TestLoadPanel:
    def test_complete_round_trip(self, tmp_path):
        dates = [f"2020-01-{d:02d}" for d in (6, 7, 8, 9, 10)]
        rows = [f"{d},{a},{100 + i}" for a in ("AAA", "BBB", "CCC") for i, d in enumerate(dates)]
        files = _simple_files(tmp_path, dates, rows)
        panel = load_panel(*files)
        assert panel.n_assets == 3
        assert len(panel.calendar) == 5
        assert panel.returns.shape == (4, 3)

    def test_zero_price_names_asset_and_date(self, tmp_path):
        dates = [f"2020-01-{d:02d}" for d in (6, 7, 8)]
        rows = ["2020-01-06,AAA,100", "2020-01-07,AAA,0", "2020-01-08,AAA,101",
                "2020-01-06,BBB,50", "2020-01-07,BBB,51", "2020-01-08,BBB,52"]
        files = _simple_files(tmp_path, dates, rows)
        with pytest.raises(DataError, match="AAA.*2020-01-07"):
            load_panel(*files)

    def test_intersection_alignment(self, tmp_path):
        # Prices cover 300 business days, benchmarks/riskfree only 250: the
        # panel lands on the 250-day intersection.
        all_dates = pd.bdate_range("2019-01-01", periods=300).strftime("%Y-%m-%d").tolist()
        short_dates = all_dates[25:275]
        rows = [f"{d},{a},{100 + i * 0.1}" for a in ("AAA", "BBB") for i, d in enumerate(all_dates)]
        prices = _write(tmp_path / "p.csv", "date,asset_id,close\n" + "\n".join(rows) + "\n")
        fund_lines = ["date,asset_id,cap,mtb,ev,div_yield,ebitda"]
        for a in ("AAA", "BBB"):
            fund_lines.append(f"{all_dates[0]},{a},1e9,2.0,1.1e9,0.02,1e8")
        fundamentals = _write(tmp_path / "f.csv", "\n".join(fund_lines) + "\n")
        benchmarks = _write(
            tmp_path / "b.csv",
            "date,name,close\n" + "\n".join(_benchmark_rows(short_dates)) + "\n",
        )
        riskfree = _write(
            tmp_path / "r.csv",
            "date,annual_yield\n" + "\n".join(f"{d},0.02" for d in short_dates) + "\n",
        )
        panel = load_panel(prices, fundamentals, benchmarks, riskfree)
        expected = sorted(set(all_dates) & set(short_dates))
        assert len(panel.calendar) == len(expected) == 250
        assert panel.calendar[0] == pd.Timestamp(expected[0])
        assert panel.calendar[-1] == pd.Timestamp(expected[-1])

    def test_short_gap_forward_filled(self, tmp_path):
        dates = pd.bdate_range("2020-01-06", periods=30).strftime("%Y-%m-%d").tolist()
        rows = []
        for i, d in enumerate(dates):
            if d != dates[4]:  # one missing day for AAA (3.3% of the window)
                rows.append(f"{d},AAA,{100 + i}")
            rows.append(f"{d},BBB,{50 + i}")
        files = _simple_files(tmp_path, dates, rows)
        panel = load_panel(*files)
        assert panel.n_assets == 2
        # Day 4 forward-filled from day 3.
        assert panel.prices.loc[pd.Timestamp(dates[4]), "AAA"] == pytest.approx(103.0)

    def test_excessive_missing_drops_asset(self, tmp_path):
        dates = pd.bdate_range("2020-01-06", periods=40).strftime("%Y-%m-%d").tolist()
        rows = []
        for i, d in enumerate(dates):
            if i % 3 != 0:  # ~33% missing for AAA
                rows.append(f"{d},AAA,{100 + i}")
            rows.append(f"{d},BBB,{50 + i}")
            rows.append(f"{d},CCC,{70 + i}")
        files = _simple_files(tmp_path, dates, rows)
        panel = load_panel(*files)
        assert "AAA" not in panel.assets
        assert any("AAA" in d and "missing" in d for d in panel.diagnostics)

    def test_long_gap_drops_asset(self, tmp_path):
        dates = pd.bdate_range("2020-01-06", periods=150).strftime("%Y-%m-%d").tolist()
        rows = []
        for i, d in enumerate(dates):
            if not (10 <= i <= 14):  # 5-day hole, under 5% of window
                rows.append(f"{d},AAA,{100 + i}")
            rows.append(f"{d},BBB,{50 + i}")
            rows.append(f"{d},CCC,{70 + i}")
        files = _simple_files(tmp_path, dates, rows)
        panel = load_panel(*files)
        assert "AAA" not in panel.assets
        assert any("AAA" in d and "gap" in d for d in panel.diagnostics)

    def test_y10_uses_yield_changes(self, tmp_path):
        dates = [f"2020-01-{d:02d}" for d in (6, 7, 8, 9, 10)]
        rows = [f"{d},{a},{100 + i}" for a in ("AAA", "BBB") for i, d in enumerate(dates)]
        files = _simple_files(tmp_path, dates, rows)
        panel = load_panel(*files)
        assert np.allclose(panel.benchmarks["Y10"].to_numpy(), 0.0001)

    def test_missing_benchmark_name_fails(self, tmp_path):
        dates = [f"2020-01-{d:02d}" for d in (6, 7, 8)]
        rows = [f"{d},{a},{100 + i}" for a in ("AAA", "BBB") for i, d in enumerate(dates)]
        prices, fundamentals, _, riskfree = _simple_files(tmp_path, dates, rows)
        bench = _write(
            tmp_path / "b2.csv",
            "date,name,close\n" + "\n".join(f"{d},MARKET,100" for d in dates) + "\n",
        )
        with pytest.raises(DataError, match="reserved"):
            load_panel(prices, fundamentals, bench, riskfree)


class TestPanelProperties:
    def test_alignment_and_cached_views(self):
        panel = generate_synthetic_panel(SynthConfig(n_assets=4, n_days=60), seed=5)
        assert panel.returns.index.equals(panel.calendar[1:])
        assert panel.excess.shape == panel.returns.shape
        expected = panel.returns - panel.riskfree.iloc[1:].to_numpy()[:, None] / 252
        assert np.allclose(panel.excess.to_numpy(), expected.to_numpy(), atol=1e-15)
        assert np.allclose(
            panel.basket_returns.to_numpy(), panel.returns.mean(axis=1).to_numpy()
        )

    def test_fundamental_staleness_flags(self):
        panel = generate_synthetic_panel(SynthConfig(n_assets=3, n_days=50), seed=6)
        stale = panel.fundamentals.is_stale("cap")
        reported = panel.fundamentals.reported["cap"]
        assert not stale.to_numpy()[reported.to_numpy()].any()
        assert stale.iloc[1].all()  # day after a report is carried forward

    def test_empty_fundamentals_support_price_only_fields(self):
        from fieldbt.data import FundamentalPanel, PanelData
        from fieldbt.fields import FieldSpec, compute_fields

        base = generate_synthetic_panel(SynthConfig(n_assets=4, n_days=120), seed=8)
        panel = PanelData(
            calendar=base.calendar,
            prices=base.prices,
            fundamentals=FundamentalPanel.empty(base.calendar, base.assets),
            benchmarks=base.benchmarks,
            riskfree=base.riskfree,
        )
        matrix = compute_fields(
            panel,
            (panel.returns.index[0], panel.returns.index[-1]),
            FieldSpec(("SIGMA", "SHARPE", "BETA_MARKET")),
        )
        assert matrix.values.shape == (4, 3)
