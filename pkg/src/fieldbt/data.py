"""Panel ingestion and alignment: prices, fundamentals, benchmarks, risk-free yields.

Conventions used throughout the engine:

- A panel's trading calendar has T days; every return series lives on
  calendar[1:], so return at date d is price(d)/price(d_prev) - 1.
- The risk-free series holds annualized yields (fractions); the daily rate is
  annual/252, matched to each return by its date.
- Benchmark inputs are close levels; they are stored as return series. The
  Y10 benchmark is a yield level, so its "return" is the daily change in
  yield rather than a percentage change.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from fieldbt.errors import DataError

TRADING_DAYS_PER_YEAR = 252

FUNDAMENTAL_FIELDS = ("cap", "mtb", "ev", "div_yield", "ebitda")
BENCHMARK_NAMES = ("MARKET", "OIL", "VIX", "Y10", "VALUE", "GROWTH", "MOMENTUM")

# Per-asset missing-price policy for loaded panels.
MAX_MISSING_FRACTION = 0.05
MAX_FFILL_RUN = 3


def make_calendar(dates: Sequence) -> pd.DatetimeIndex:
    """Validate and normalize a trading calendar (strictly increasing, unique)."""
    cal = pd.DatetimeIndex(pd.to_datetime(list(dates)))
    if len(cal) == 0:
        raise DataError("empty trading calendar")
    if cal.has_duplicates:
        dupes = cal[cal.duplicated()].unique()
        raise DataError(f"duplicate calendar dates: {list(dupes[:3])}")
    if not cal.is_monotonic_increasing:
        raise DataError("calendar dates are not strictly increasing")
    return cal


def to_returns(prices):
    """Simple daily returns from a price series; output has length n-1.

    Accepts a 1-D array-like or pd.Series; a Series keeps its name and is
    indexed on the input index minus its first element.
    """
    if isinstance(prices, pd.Series):
        values = prices.to_numpy(dtype=float)
    else:
        values = np.asarray(prices, dtype=float)
    if values.ndim != 1:
        values = values.ravel()
    if values.size < 2:
        raise DataError("need at least 2 price points to compute returns")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise DataError("prices must be finite and strictly positive")
    rets = values[1:] / values[:-1] - 1.0
    if isinstance(prices, pd.Series):
        return pd.Series(rets, index=prices.index[1:], name=prices.name)
    return rets


def excess_returns(returns, annual_yields):
    """Subtract the contemporaneous daily risk-free rate (annual/252) elementwise."""
    r = np.asarray(returns, dtype=float)
    y = np.asarray(annual_yields, dtype=float)
    if r.shape != y.shape:
        raise DataError(f"length mismatch: returns {r.shape} vs yields {y.shape}")
    out = r - y / TRADING_DAYS_PER_YEAR
    if isinstance(returns, pd.Series):
        return pd.Series(out, index=returns.index, name=returns.name)
    return out


@dataclass(frozen=True)
class FundamentalPanel:
    """Sparse per-asset fundamental series with report-date masks.

    ``values[field]`` is a calendar x asset frame that is NaN except on report
    dates; ``reported[field]`` marks actual report dates, so a forward-filled
    view can flag stale observations.
    """

    values: Dict[str, pd.DataFrame]
    reported: Dict[str, pd.DataFrame]

    def __post_init__(self) -> None:
        for f in FUNDAMENTAL_FIELDS:
            if f not in self.values or f not in self.reported:
                raise DataError(f"fundamental panel missing field {f!r}")
        for f in ("cap", "ev"):
            frame = self.values[f]
            bad = frame.to_numpy(dtype=float)
            if np.any(bad[np.isfinite(bad)] <= 0):
                raise DataError(f"{f} must be strictly positive where present")

    def filled(self, name: str) -> pd.DataFrame:
        """Forward-filled view of one field (NaN before the first report)."""
        if name not in self.values:
            raise DataError(f"unknown fundamental field {name!r}")
        return self.values[name].ffill()

    def is_stale(self, name: str) -> pd.DataFrame:
        """True where a forward-filled value is carried from an earlier report."""
        return self.filled(name).notna() & ~self.reported[name]

    @classmethod
    def empty(cls, calendar: pd.DatetimeIndex, assets: Sequence[str]) -> "FundamentalPanel":
        vals = {
            f: pd.DataFrame(np.nan, index=calendar, columns=list(assets))
            for f in FUNDAMENTAL_FIELDS
        }
        reps = {
            f: pd.DataFrame(False, index=calendar, columns=list(assets))
            for f in FUNDAMENTAL_FIELDS
        }
        return cls(values=vals, reported=reps)


@dataclass(frozen=True)
class PanelData:
    """Aligned daily panel: prices, fundamentals, benchmark returns, risk-free yields.

    Immutable after construction; safe for concurrent reads. ``benchmarks``
    holds return series on calendar[1:]; everything else is on the calendar.
    """

    calendar: pd.DatetimeIndex
    prices: pd.DataFrame
    fundamentals: FundamentalPanel
    benchmarks: pd.DataFrame
    riskfree: pd.Series
    diagnostics: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        cal = self.calendar
        if len(cal) < 3:
            raise DataError("panel calendar must have at least 3 days")
        if self.prices.shape[1] < 2:
            raise DataError("panel needs at least 2 assets")
        if not self.prices.index.equals(cal):
            raise DataError("prices are not aligned to the calendar")
        vals = self.prices.to_numpy(dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DataError("prices contain missing values after alignment")
        if np.any(vals <= 0):
            pos = np.argwhere(vals <= 0)[0]
            raise DataError(
                f"non-positive price for asset {self.prices.columns[pos[1]]!r} "
                f"on {cal[pos[0]].date()}"
            )
        if not self.benchmarks.index.equals(cal[1:]):
            raise DataError("benchmark returns must live on calendar[1:]")
        for name in BENCHMARK_NAMES:
            if name not in self.benchmarks.columns:
                raise DataError(f"missing benchmark series {name!r}")
        if not np.all(np.isfinite(self.benchmarks.to_numpy(dtype=float))):
            raise DataError("benchmark returns contain missing values")
        if not self.riskfree.index.equals(cal):
            raise DataError("risk-free series is not aligned to the calendar")
        if not np.all(np.isfinite(self.riskfree.to_numpy(dtype=float))):
            raise DataError("risk-free series contains missing values")
        for f in FUNDAMENTAL_FIELDS:
            if not self.fundamentals.values[f].index.equals(cal):
                raise DataError(f"fundamental field {f!r} not aligned to the calendar")

    @property
    def assets(self) -> Tuple[str, ...]:
        return tuple(self.prices.columns)

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]

    @cached_property
    def returns(self) -> pd.DataFrame:
        """Simple daily returns, one column per asset, on calendar[1:]."""
        vals = self.prices.to_numpy(dtype=float)
        rets = vals[1:] / vals[:-1] - 1.0
        return pd.DataFrame(rets, index=self.calendar[1:], columns=self.prices.columns)

    @cached_property
    def riskfree_daily(self) -> pd.Series:
        """Daily risk-free rate (annual/252) aligned to the returns index."""
        return pd.Series(
            self.riskfree.to_numpy(dtype=float)[1:] / TRADING_DAYS_PER_YEAR,
            index=self.calendar[1:],
            name="riskfree_daily",
        )

    @cached_property
    def excess(self) -> pd.DataFrame:
        """Daily returns net of the contemporaneous risk-free rate."""
        return self.returns.sub(self.riskfree_daily, axis=0)

    @cached_property
    def basket_returns(self) -> pd.Series:
        """Equal-weighted basket return series (mean across assets, raw returns)."""
        return self.returns.mean(axis=1).rename("basket")


def _read_csv(path: Union[str, Path], expected: Sequence[str], label: str) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{label} file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise DataError(f"malformed {label} CSV {path}: {exc}") from exc
    missing = [c for c in expected if c not in frame.columns]
    if missing:
        raise DataError(f"{label} CSV {path} missing columns {missing}")
    try:
        frame["date"] = pd.to_datetime(frame["date"], format="ISO8601")
    except Exception as exc:
        raise DataError(f"unparseable dates in {label} CSV {path}: {exc}") from exc
    return frame


def _fill_short_gaps(col: np.ndarray, max_run: int) -> np.ndarray:
    """Forward-fill interior NaN runs of length <= max_run; longer runs stay NaN."""
    out = col.copy()
    n = out.size
    i = 0
    while i < n:
        if np.isnan(out[i]):
            j = i
            while j < n and np.isnan(out[j]):
                j += 1
            run = j - i
            if i > 0 and run <= max_run:
                out[i:j] = out[i - 1]
            i = j
        else:
            i += 1
    return out


def load_panel(
    price_file: Union[str, Path],
    fundamentals_file: Union[str, Path],
    benchmarks_file: Union[str, Path],
    riskfree_file: Union[str, Path],
) -> PanelData:
    """Load and align the four CSV inputs into a PanelData.

    The calendar is the intersection of price dates, complete benchmark
    dates, and risk-free dates. Per asset, isolated missing prices (runs of
    at most 3 days) are forward-filled; assets with more than 5% missing, an
    unfillable leading gap, or a gap longer than 3 days are dropped with a
    named diagnostic. Any non-positive reported price aborts the load.
    """
    prices_raw = _read_csv(price_file, ("date", "asset_id", "close"), "prices")
    fund_raw = _read_csv(
        fundamentals_file, ("date", "asset_id") + FUNDAMENTAL_FIELDS, "fundamentals"
    )
    bench_raw = _read_csv(benchmarks_file, ("date", "name", "close"), "benchmarks")
    rf_raw = _read_csv(riskfree_file, ("date", "annual_yield"), "riskfree")

    closes = pd.to_numeric(prices_raw["close"], errors="coerce")
    bad = prices_raw[(closes.notna()) & (closes <= 0)]
    if len(bad):
        row = bad.iloc[0]
        raise DataError(
            f"non-positive price for asset {row['asset_id']!r} on {row['date'].date()}"
        )
    prices_raw = prices_raw.assign(close=closes)

    price_wide = prices_raw.pivot_table(
        index="date", columns="asset_id", values="close", aggfunc="first"
    ).sort_index()
    bench_wide = bench_raw.pivot_table(
        index="date", columns="name", values="close", aggfunc="first"
    ).sort_index()
    missing_bench = [n for n in BENCHMARK_NAMES if n not in bench_wide.columns]
    if missing_bench:
        raise DataError(f"benchmarks CSV missing reserved names {missing_bench}")
    bench_complete = bench_wide.dropna(subset=list(BENCHMARK_NAMES))

    rf = (
        rf_raw.assign(annual_yield=pd.to_numeric(rf_raw["annual_yield"], errors="coerce"))
        .dropna(subset=["annual_yield"])
        .drop_duplicates(subset=["date"], keep="first")
        .set_index("date")["annual_yield"]
        .sort_index()
    )

    cal_dates = price_wide.index.intersection(bench_complete.index).intersection(rf.index)
    if len(cal_dates) < 3:
        raise DataError(
            "calendar mismatch: date intersection across inputs has "
            f"{len(cal_dates)} days"
        )
    calendar = make_calendar(cal_dates)

    price_win = price_wide.loc[calendar]
    diagnostics = []
    kept = {}
    for asset in price_win.columns:
        col = price_win[asset].to_numpy(dtype=float)
        n_missing = int(np.isnan(col).sum())
        if n_missing > MAX_MISSING_FRACTION * col.size:
            diagnostics.append(
                f"asset {asset!r} dropped: {n_missing}/{col.size} missing prices"
            )
            continue
        filled = _fill_short_gaps(col, MAX_FFILL_RUN)
        if np.isnan(filled).any():
            where = calendar[int(np.argmax(np.isnan(filled)))].date()
            diagnostics.append(
                f"asset {asset!r} dropped: unfillable price gap at {where}"
            )
            continue
        kept[str(asset)] = filled
    if len(kept) < 2:
        raise DataError(
            f"fewer than 2 assets survive missing-data screening "
            f"(diagnostics: {diagnostics})"
        )
    prices = pd.DataFrame(kept, index=calendar)

    bench_levels = bench_complete.loc[calendar, list(BENCHMARK_NAMES)]
    bench_rets = {}
    for name in BENCHMARK_NAMES:
        level = bench_levels[name].to_numpy(dtype=float)
        if name == "Y10":
            # A yield level is not a return; use daily changes.
            bench_rets[name] = np.diff(level)
        else:
            if np.any(level <= 0):
                raise DataError(f"benchmark {name!r} has non-positive close levels")
            bench_rets[name] = level[1:] / level[:-1] - 1.0
    benchmarks = pd.DataFrame(bench_rets, index=calendar[1:])

    fundamentals = _build_fundamentals(fund_raw, calendar, tuple(prices.columns))

    return PanelData(
        calendar=calendar,
        prices=prices,
        fundamentals=fundamentals,
        benchmarks=benchmarks,
        riskfree=rf.loc[calendar].rename("annual_yield"),
        diagnostics=tuple(diagnostics),
    )


def _build_fundamentals(
    fund_raw: pd.DataFrame, calendar: pd.DatetimeIndex, assets: Tuple[str, ...]
) -> FundamentalPanel:
    values: Dict[str, pd.DataFrame] = {}
    reported: Dict[str, pd.DataFrame] = {}
    fund_raw = fund_raw[fund_raw["asset_id"].astype(str).isin(assets)]
    for f in FUNDAMENTAL_FIELDS:
        col = pd.to_numeric(fund_raw[f], errors="coerce")
        sub = fund_raw.assign(_v=col).dropna(subset=["_v"])
        wide = sub.pivot_table(index="date", columns="asset_id", values="_v", aggfunc="last")
        wide.columns = [str(c) for c in wide.columns]
        wide = wide.reindex(columns=list(assets))
        # Seed the first calendar day with the last report at or before it so
        # point-in-time forward-fills can use pre-window history.
        on_cal = wide.reindex(calendar)
        before = wide[wide.index <= calendar[0]]
        if len(before):
            last_prior = before.ffill().iloc[-1]
            seed = on_cal.iloc[0].fillna(last_prior)
            on_cal.iloc[0] = seed
        rep = wide.reindex(calendar).notna()
        values[f] = on_cal
        reported[f] = rep
    return FundamentalPanel(values=values, reported=reported)


