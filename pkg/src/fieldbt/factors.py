"""Synthetic benchmark construction from the basket itself.

Two families: long-short factor indexes built by sorting the basket on a
fundamental (low tercile minus high tercile, equal-weighted legs, refreshed
on a rebalance schedule), and the cross-pair correlation index (the average
pairwise return correlation over a window).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fieldbt.data import PanelData
from fieldbt.errors import DataError

FACTOR_FIELDS = {
    "DIVYIELD": "div_yield",
    "EV": "ev",
    "MTB": "mtb",
    "EVEBITDA": None,  # ratio of ev to ebitda, assembled below
}

MIN_FACTOR_ASSETS = 6
MIN_FIELD_COVERAGE = 0.90


@dataclass(frozen=True)
class FactorLegs:
    """Constituents of one factor period."""

    date: pd.Timestamp
    low: Tuple[str, ...]
    high: Tuple[str, ...]


@dataclass(frozen=True)
class FactorIndex:
    """A low-minus-high factor return series with its per-period legs."""

    name: str
    returns: pd.Series
    legs: Tuple[FactorLegs, ...]


@dataclass(frozen=True)
class CrossPairIndex:
    """Rolling series of average pairwise correlations."""

    dates: Tuple[pd.Timestamp, ...]
    values: np.ndarray
    window_length: int
    step: int


def monthly_schedule(panel: PanelData) -> Tuple[pd.Timestamp, ...]:
    """First trading day of each calendar month on the panel's calendar."""
    cal = panel.calendar
    firsts = pd.Series(cal, index=cal).groupby(cal.to_period("M")).min()
    return tuple(pd.Timestamp(d) for d in firsts)


def factor_sort_basis(panel: PanelData, name: str) -> pd.DataFrame:
    """Point-in-time (forward-filled) sort values for one factor field."""
    if name not in FACTOR_FIELDS:
        raise DataError(f"unknown factor field {name!r}")
    if name == "EVEBITDA":
        ev = panel.fundamentals.filled("ev")
        ebitda = panel.fundamentals.filled("ebitda")
        basis = ev / ebitda.replace(0.0, np.nan)
    else:
        basis = panel.fundamentals.filled(FACTOR_FIELDS[name])
    return basis


def build_factor_index(
    panel: PanelData,
    field: str,
    schedule: Optional[Sequence[pd.Timestamp]] = None,
) -> FactorIndex:
    """Sort the basket on a fundamental at each rebalance and hold legs until the next.

    Low leg = bottom tercile of the sort value, high leg = top tercile, each
    of size floor(eligible/3); the daily factor return is mean(low-leg
    returns) minus mean(high-leg returns). Assets missing the field at a
    rebalance sit out both legs for that period.
    """
    if panel.n_assets < MIN_FACTOR_ASSETS:
        raise DataError(f"factor construction needs >= {MIN_FACTOR_ASSETS} assets")
    if schedule is None:
        schedule = monthly_schedule(panel)
    schedule = sorted(pd.Timestamp(d) for d in schedule)
    if not schedule:
        raise DataError("empty factor rebalance schedule")

    basis = factor_sort_basis(panel, field)
    rets = panel.returns
    ret_index = rets.index
    values = rets.to_numpy()
    assets = np.array(panel.assets)

    out = np.full(len(ret_index), np.nan)
    legs = []
    for k, date in enumerate(schedule):
        if date not in panel.calendar:
            raise DataError(f"rebalance date {date.date()} not on the panel calendar")
        row = basis.loc[:date].iloc[-1].to_numpy(dtype=float)
        eligible = np.isfinite(row)
        n_eligible = int(eligible.sum())
        if n_eligible < MIN_FIELD_COVERAGE * panel.n_assets:
            raise DataError(
                f"factor {field}: only {n_eligible}/{panel.n_assets} assets have "
                f"values at {date.date()}"
            )
        if n_eligible < MIN_FACTOR_ASSETS:
            raise DataError(f"factor {field}: fewer than {MIN_FACTOR_ASSETS} eligible assets")
        leg_size = n_eligible // 3
        elig_idx = np.flatnonzero(eligible)
        # Deterministic sort: value ascending, asset id as tiebreak.
        order = elig_idx[np.lexsort((assets[elig_idx], row[elig_idx]))]
        low_idx = order[:leg_size]
        high_idx = order[-leg_size:]
        legs.append(
            FactorLegs(
                date=date,
                low=tuple(assets[low_idx]),
                high=tuple(assets[high_idx]),
            )
        )
        start = ret_index.searchsorted(date, side="right")
        if k + 1 < len(schedule):
            stop = ret_index.searchsorted(schedule[k + 1], side="right")
        else:
            stop = len(ret_index)
        if start < stop:
            out[start:stop] = values[start:stop, low_idx].mean(axis=1) - values[
                start:stop, high_idx
            ].mean(axis=1)

    return FactorIndex(
        name=field,
        returns=pd.Series(out, index=ret_index, name=field),
        legs=tuple(legs),
    )


def _pairwise_mean_correlation(window_values: np.ndarray) -> float:
    stds = window_values.std(axis=0)
    keep = stds > 0
    if int(keep.sum()) < 2:
        raise DataError("cross-pair index needs at least 2 nonconstant assets")
    x = window_values[:, keep]
    corr = np.corrcoef(x, rowvar=False)
    n = corr.shape[0]
    iu = np.triu_indices(n, k=1)
    return float(np.clip(corr[iu], -1.0, 1.0).mean())


def cross_pair_index(panel: PanelData, window) -> float:
    """Average pairwise correlation over a window (unordered pairs, N(N-1)/2 denominator)."""
    start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    block = panel.returns.loc[start:end]
    if len(block) < 3:
        raise DataError(f"cross-pair window too short: {len(block)} return days")
    return _pairwise_mean_correlation(block.to_numpy())


def cross_pair_series(panel: PanelData, window_length: int, step: int = 1) -> CrossPairIndex:
    """Rolling cross-pair index; each value is stamped at its window's end date."""
    rets = panel.returns
    if window_length < 3:
        raise DataError("cross-pair window_length must be >= 3")
    if window_length > len(rets):
        raise DataError(
            f"window_length {window_length} exceeds panel returns length {len(rets)}"
        )
    if step < 1:
        raise DataError("step must be >= 1")
    values = rets.to_numpy()
    dates = []
    out = []
    for end in range(window_length, len(rets) + 1, step):
        block = values[end - window_length : end]
        out.append(_pairwise_mean_correlation(block))
        dates.append(pd.Timestamp(rets.index[end - 1]))
    return CrossPairIndex(
        dates=tuple(dates),
        values=np.asarray(out),
        window_length=window_length,
        step=step,
    )


def factor_benchmark_rows(index: FactorIndex) -> pd.DataFrame:
    """Export a factor as benchmarks.csv-style rows (compounded level series)."""
    rets = index.returns.dropna()
    levels = np.cumprod(1.0 + rets.to_numpy())
    return pd.DataFrame(
        {
            "date": rets.index.strftime("%Y-%m-%d"),
            "name": index.name,
            "close": levels,
        }
    )
