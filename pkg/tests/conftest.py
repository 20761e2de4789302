"""Shared fixtures: hand-built panels for unit tests."""

import numpy as np
import pandas as pd
import pytest

from fieldbt.data import (
    BENCHMARK_NAMES,
    FUNDAMENTAL_FIELDS,
    FundamentalPanel,
    PanelData,
)


def build_panel(
    returns,
    assets=None,
    start="2015-01-05",
    riskfree=0.0,
    benchmarks=None,
    fundamentals=None,
    bench_seed=1234,
):
    """Assemble a PanelData from a (T-1) x N daily return matrix.

    ``fundamentals`` maps field name -> per-asset values (reported on day 0)
    or a full calendar x asset frame. Benchmarks default to small seeded
    nonconstant series.
    """
    returns = np.asarray(returns, dtype=float)
    n_ret, n_assets = returns.shape
    if assets is None:
        assets = [f"A{i:03d}" for i in range(n_assets)]
    calendar = pd.bdate_range(start, periods=n_ret + 1)
    growth = np.vstack([np.ones(n_assets), np.cumprod(1.0 + returns, axis=0)])
    prices = pd.DataFrame(100.0 * growth, index=calendar, columns=assets)

    if benchmarks is None:
        rng = np.random.default_rng(bench_seed)
        benchmarks = pd.DataFrame(
            {name: rng.normal(0.0, 0.005, size=n_ret) for name in BENCHMARK_NAMES},
            index=calendar[1:],
        )
    else:
        benchmarks = pd.DataFrame(benchmarks, index=calendar[1:])[list(BENCHMARK_NAMES)]

    fund_defaults = {
        "cap": 1e9 * (1.0 + np.arange(n_assets)),
        "mtb": 1.0 + np.arange(n_assets, dtype=float),
        "ev": 1.1e9 * (1.0 + np.arange(n_assets)),
        "div_yield": 0.01 + 0.001 * np.arange(n_assets),
        "ebitda": 1e8 * (1.0 + np.arange(n_assets)),
    }
    if fundamentals:
        fund_defaults.update(fundamentals)
    values, reported = {}, {}
    for f in FUNDAMENTAL_FIELDS:
        given = fund_defaults[f]
        if isinstance(given, pd.DataFrame):
            frame = given.reindex(index=calendar, columns=assets)
            mask = frame.notna()
        else:
            frame = pd.DataFrame(np.nan, index=calendar, columns=assets)
            frame.iloc[0] = np.asarray(given, dtype=float)
            mask = pd.DataFrame(False, index=calendar, columns=assets)
            mask.iloc[0] = True
        values[f] = frame
        reported[f] = mask
    fund = FundamentalPanel(values=values, reported=reported)

    rf = pd.Series(float(riskfree), index=calendar, name="annual_yield")
    return PanelData(
        calendar=calendar,
        prices=prices,
        fundamentals=fund,
        benchmarks=benchmarks,
        riskfree=rf,
    )


@pytest.fixture
def small_random_panel():
    rng = np.random.default_rng(77)
    market = rng.normal(2e-4, 0.008, size=300)
    loadings = rng.uniform(0.5, 1.5, size=10)
    rets = loadings[None, :] * market[:, None] + rng.normal(0, 0.01, size=(300, 10))
    bench = {
        "MARKET": market,
        "OIL": rng.normal(0, 0.006, size=300),
        "VIX": -1.1 * market + rng.normal(0, 0.008, size=300),
        "Y10": rng.normal(0, 0.0005, size=300),
        "VALUE": 0.4 * market + rng.normal(0, 0.004, size=300),
        "GROWTH": 0.6 * market + rng.normal(0, 0.004, size=300),
        "MOMENTUM": 0.5 * market + rng.normal(0, 0.005, size=300),
    }
    return build_panel(rets, riskfree=0.02, benchmarks=bench)
