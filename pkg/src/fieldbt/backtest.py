"""Monthly-rebalanced backtest loop and performance metrics.

Each rebalance date r (first trading day of a month) consumes two trailing
252-return windows that both end strictly before r: window_prev (rows -252..-1
relative to r) and window_prev2 (rows -504..-253). Weights set at r apply to
returns dated strictly after r through the next rebalance date, with
buy-and-hold drift inside the month. The RC model is fit on fields from
window_prev2 against mean excess returns from window_prev, predictions use
fields from window_prev, and the adaptive flip (RC* only) looks at
window_prev's cross-sectional vol-return correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import binom

from fieldbt.allocation import (
    AdaptiveState,
    WeightVector,
    adaptive_trigger,
    ef_select,
    ew_weights,
    mix_weights,
    rc_select,
    solve_frontier,
)
from fieldbt.data import PanelData
from fieldbt.errors import DataError
from fieldbt.fields import (
    TEN_FACTORS,
    FieldMatrix,
    FieldSpec,
    build_drivers,
    compute_fields,
    drivers_for_spec,
)
from fieldbt.regression import fit, flip_coefficients, predict

STRATEGIES = ("EW", "EF", "RC", "MIX", "RC*")
LOOKBACK_ROWS = 252
TOTAL_LOOKBACK_ROWS = 504


def parse_strategies(tokens: Sequence[str]) -> Tuple[str, ...]:
    """Normalize strategy names; accepts RC* or RCSTAR spellings."""
    out = []
    for tok in tokens:
        name = tok.strip().upper()
        if name == "RCSTAR":
            name = "RC*"
        if name not in STRATEGIES:
            raise DataError(f"unknown strategy {tok!r}; choose from {STRATEGIES}")
        if name not in out:
            out.append(name)
    if not out:
        raise DataError("no strategies requested")
    return tuple(out)


@dataclass(frozen=True)
class SchedulePoint:
    """One rebalance date with its input windows and holding period."""

    date: pd.Timestamp
    pos: int  # row of `date` in the returns index
    prev_window: Tuple[pd.Timestamp, pd.Timestamp]
    prev2_window: Tuple[pd.Timestamp, pd.Timestamp]
    hold_end: pd.Timestamp
    hold_end_pos: int


@dataclass(frozen=True)
class RebalanceSchedule:
    points: Tuple[SchedulePoint, ...]

    def assert_no_lookahead(self, returns_index: pd.DatetimeIndex) -> None:
        """Every input window must end strictly before its rebalance date."""
        for p in self.points:
            if not (p.prev2_window[1] < p.prev_window[1] < p.date):
                raise DataError(f"look-ahead window at rebalance {p.date.date()}")
            if not (p.date < p.hold_end):
                raise DataError(f"empty holding period at {p.date.date()}")
            if returns_index[p.pos] != p.date:
                raise DataError(f"schedule position desync at {p.date.date()}")


def build_schedule(
    panel: PanelData,
    start: Optional[pd.Timestamp] = None,
    end: Optional[pd.Timestamp] = None,
) -> RebalanceSchedule:
    """Rebalance on the first trading day of each month inside [start, end].

    Every rebalance needs 504 prior return rows; the final holding period
    runs to the first trading day of the following month, or the panel's last
    date when the panel ends mid-month.
    """
    ridx = panel.returns.index
    start = pd.Timestamp(start) if start is not None else None
    end = pd.Timestamp(end) if end is not None else None
    if start is not None and end is not None and start > end:
        raise DataError(f"backtest range is empty: {start.date()} > {end.date()}")

    cal = panel.calendar
    firsts = pd.Series(cal, index=cal).groupby(cal.to_period("M")).min()
    month_firsts = [pd.Timestamp(d) for d in firsts]
    candidates = [
        d
        for d in month_firsts
        if (start is None or d >= start) and (end is None or d <= end)
    ]

    points = []
    for d in candidates:
        pos = int(ridx.searchsorted(d))
        if pos >= len(ridx) or ridx[pos] != d:
            # The panel's first calendar day has no same-dated return row.
            continue
        if pos < TOTAL_LOOKBACK_ROWS:
            if start is not None:
                raise DataError(
                    f"rebalance {d.date()} needs {TOTAL_LOOKBACK_ROWS} prior return "
                    f"rows, found {pos}"
                )
            continue
        nxt = month_firsts.index(d) + 1
        if nxt < len(month_firsts):
            hold_end = month_firsts[nxt]
        else:
            hold_end = pd.Timestamp(cal[-1])
        hold_end_pos = int(ridx.searchsorted(hold_end))
        if hold_end_pos >= len(ridx) or ridx[hold_end_pos] != hold_end:
            raise DataError(f"holding end {hold_end.date()} not on the returns index")
        if hold_end_pos <= pos:
            continue  # no return days left to hold over
        points.append(
            SchedulePoint(
                date=d,
                pos=pos,
                prev_window=(ridx[pos - LOOKBACK_ROWS], ridx[pos - 1]),
                prev2_window=(ridx[pos - TOTAL_LOOKBACK_ROWS], ridx[pos - LOOKBACK_ROWS - 1]),
                hold_end=hold_end,
                hold_end_pos=hold_end_pos,
            )
        )
    if not points:
        raise DataError("no feasible rebalance dates in the requested range")
    schedule = RebalanceSchedule(points=tuple(points))
    schedule.assert_no_lookahead(ridx)
    return schedule


@dataclass(frozen=True)
class EquityCurve:
    """Per-period strategy returns compounded from 1.0."""

    strategy: str
    dates: Tuple[pd.Timestamp, ...]
    period_returns: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.period_returns, dtype=float)
        if np.any(r <= -1.0):
            raise DataError(f"{self.strategy}: period return at or below -100%")
        v = np.asarray(self.values, dtype=float)
        if len(self.dates) != r.size or v.size != r.size:
            raise DataError("curve arrays misaligned")
        if np.any(v <= 0):
            raise DataError("compounded values must stay positive")


def _curve(strategy: str, dates, period_returns) -> EquityCurve:
    r = np.asarray(period_returns, dtype=float)
    return EquityCurve(
        strategy=strategy,
        dates=tuple(dates),
        period_returns=r,
        values=np.cumprod(1.0 + r),
    )


@dataclass(frozen=True)
class MonthRecord:
    """Per-rebalance diagnostics."""

    date: pd.Timestamp
    universe_size: int
    dropped_assets: Mapping[str, str]
    dropped_fields: Tuple[str, ...]
    adaptive: Optional[AdaptiveState]
    frontier_converged: Optional[bool]
    r_squared: Optional[float]


@dataclass(frozen=True)
class BacktestRun:
    """Everything run_backtest produced for one (panel, strategies, range)."""

    strategies: Tuple[str, ...]
    curves: Dict[str, EquityCurve]
    rf_period_returns: np.ndarray
    selections: Dict[str, Tuple[frozenset, ...]]
    weight_history: Dict[str, Tuple[WeightVector, ...]]
    month_asset_returns: Tuple[pd.Series, ...]
    records: Tuple[MonthRecord, ...]
    schedule: RebalanceSchedule


def run_backtest(
    panel: PanelData,
    strategies: Sequence[str],
    start=None,
    end=None,
    field_spec: FieldSpec = TEN_FACTORS,
    force_flip_off: bool = False,
) -> BacktestRun:
    """Drive the monthly loop and record curves, selections, and diagnostics."""
    strategies = parse_strategies(strategies)
    schedule = build_schedule(panel, start, end)

    need_rc = any(s in strategies for s in ("RC", "RC*", "MIX"))
    need_ef = any(s in strategies for s in ("EF", "MIX"))
    need_fields = need_rc or need_ef
    drivers = (
        build_drivers(panel, names=drivers_for_spec(field_spec)) if need_rc else None
    )

    ridx = panel.returns.index
    ret_vals = panel.returns.to_numpy()
    exc_vals = panel.excess.to_numpy()
    rf_daily = panel.riskfree_daily.to_numpy()
    assets = panel.assets
    asset_pos = {a: i for i, a in enumerate(assets)}

    period_returns: Dict[str, list] = {s: [] for s in strategies}
    selections: Dict[str, list] = {s: [] for s in strategies if s in ("EF", "RC", "RC*")}
    weight_history: Dict[str, list] = {s: [] for s in strategies}
    month_asset_returns = []
    records = []
    rf_period = []
    dates = []

    for point in schedule.points:
        pos, end_pos = point.pos, point.hold_end_pos
        hold = slice(pos + 1, end_pos + 1)
        growth = np.prod(1.0 + ret_vals[hold], axis=0)
        rf_period.append(float(np.prod(1.0 + rf_daily[hold]) - 1.0))
        dates.append(point.hold_end)

        universe = assets
        fields_prev = fields_prev2 = None
        dropped: Dict[str, str] = {}
        if need_fields:
            fields_prev2 = compute_fields(panel, point.prev2_window, field_spec, drivers=drivers)
            fields_prev = compute_fields(panel, point.prev_window, field_spec, drivers=drivers)
            universe = tuple(a for a in fields_prev2.assets if a in set(fields_prev.assets))
            if not universe:
                raise DataError(f"empty retained-asset set at {point.date.date()}")
            dropped = {**fields_prev2.dropped, **fields_prev.dropped}
        uni_idx = np.array([asset_pos[a] for a in universe])

        month_asset_returns.append(
            pd.Series(growth[uni_idx] - 1.0, index=list(universe))
        )

        prev_rows = slice(pos - LOOKBACK_ROWS, pos)
        model = predictions = None
        state = None
        frontier = None
        if need_rc:
            realized = pd.Series(
                exc_vals[prev_rows][:, uni_idx].mean(axis=0), index=list(universe)
            )
            model = fit(_subset_matrix(fields_prev2, universe), realized)
            predictions = predict(model, _subset_matrix(fields_prev, universe))
        if "RC*" in strategies:
            state = adaptive_trigger(panel, point.prev_window, assets=universe)
            if force_flip_off:
                state = AdaptiveState(flip=False, trigger=abs(state.trigger))
        if need_ef:
            exc_win = exc_vals[prev_rows][:, uni_idx]
            mu = exc_win.mean(axis=0)
            cov = np.cov(exc_win, rowvar=False, ddof=1)
            # EW variance is the average covariance entry.
            ew_target = math.sqrt(max(float(cov.mean()), 1e-300))
            frontier = solve_frontier(mu, cov, target_vol=ew_target, assets=universe)

        weights: Dict[str, WeightVector] = {}
        if "EW" in strategies:
            weights["EW"] = ew_weights(assets, date=point.date)
        if need_ef:
            ef = ef_select(frontier, n_total=len(universe), date=point.date)
            if "EF" in strategies:
                weights["EF"] = ef
        if need_rc:
            rc = rc_select(predictions, date=point.date)
            if "RC" in strategies:
                weights["RC"] = rc
        if "RC*" in strategies:
            if state.flip:
                flipped_preds = predict(
                    flip_coefficients(model), _subset_matrix(fields_prev, universe)
                )
                weights["RC*"] = rc_select(flipped_preds, date=point.date, strategy="RC*")
            else:
                weights["RC*"] = rc_select(predictions, date=point.date, strategy="RC*")
        if "MIX" in strategies:
            weights["MIX"] = mix_weights(ef, rc)

        for s in strategies:
            wv = weights[s]
            idx = np.array([asset_pos[a] for a in wv.assets])
            period_returns[s].append(float(wv.weights @ growth[idx] - 1.0))
            weight_history[s].append(wv)
            if s in selections:
                selections[s].append(frozenset(wv.support))

        records.append(
            MonthRecord(
                date=point.date,
                universe_size=len(universe),
                dropped_assets=dropped,
                dropped_fields=model.dropped_fields if model is not None else (),
                adaptive=state,
                frontier_converged=frontier.converged if frontier is not None else None,
                r_squared=model.r_squared if model is not None else None,
            )
        )

    curves = {s: _curve(s, dates, period_returns[s]) for s in strategies}
    return BacktestRun(
        strategies=strategies,
        curves=curves,
        rf_period_returns=np.asarray(rf_period),
        selections={s: tuple(v) for s, v in selections.items()},
        weight_history={s: tuple(v) for s, v in weight_history.items()},
        month_asset_returns=tuple(month_asset_returns),
        records=tuple(records),
        schedule=schedule,
    )


def _subset_matrix(matrix: FieldMatrix, universe) -> FieldMatrix:
    keep = [matrix.assets.index(a) for a in universe]
    return FieldMatrix(
        start=matrix.start,
        end=matrix.end,
        field_names=matrix.field_names,
        assets=tuple(universe),
        values=matrix.values[keep],
        dropped=matrix.dropped,
    )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def metric_annualized_return(curve: EquityCurve) -> float:
    """Geometric annualization of the terminal compounded value."""
    m = curve.period_returns.size
    if m < 12:
        raise DataError(f"annualized return needs >= 12 periods, got {m}")
    return float(curve.values[-1] ** (12.0 / m) - 1.0)


def metric_sharpe(curve: EquityCurve, riskfree) -> float:
    """Annualized Sharpe: mean monthly excess over its sample std, times sqrt(12)."""
    rf = np.asarray(riskfree, dtype=float)
    r = curve.period_returns
    if r.size < 12:
        raise DataError(f"sharpe needs >= 12 periods, got {r.size}")
    if rf.shape != r.shape:
        raise DataError("risk-free periods misaligned with the curve")
    excess = r - rf
    sd = excess.std(ddof=1)
    if sd == 0 or np.ptp(excess) == 0.0:
        raise DataError("sharpe undefined: zero volatility of monthly excess returns")
    return float(excess.mean() / sd * math.sqrt(12.0))


def metric_max_up_dd(curve: EquityCurve) -> Tuple[float, float]:
    """Best and worst compounded return over all 12-consecutive-month windows."""
    r = curve.period_returns
    if r.size < 12:
        raise DataError(f"max up/dd needs >= 12 periods, got {r.size}")
    c = np.concatenate([[1.0], np.cumprod(1.0 + r)])
    windows = c[12:] / c[:-12] - 1.0
    return float(windows.max()), float(windows.min())


def metric_peak_trough_dd(curve: EquityCurve) -> float:
    """Classic peak-to-trough drawdown of the compounded curve (extra metric,
    not the rolling-window Max DD)."""
    values = np.concatenate([[1.0], curve.values])
    peaks = np.maximum.accumulate(values)
    return float((values / peaks - 1.0).min())


def metric_months_plus(curve: EquityCurve, baseline: EquityCurve) -> int:
    """Months with strictly greater period return than the baseline."""
    if curve.dates != baseline.dates:
        raise DataError("curves cover different periods")
    return int((curve.period_returns > baseline.period_returns).sum())


@dataclass(frozen=True)
class FidelityResult:
    value: float
    months_used: int
    months_skipped: int


def metric_fidelity(
    selections: Sequence[frozenset], realized: Sequence[pd.Series]
) -> FidelityResult:
    """Average one-sided binomial confidence that selections beat random picking.

    Per month, with N basket assets of which m outperform the basket mean
    (strictly), a random picker lands k' < k outperformers out of n picks
    with probability BinomCDF(k-1; n, m/N); the metric averages that
    probability over months with nonempty selections.
    """
    if len(selections) != len(realized):
        raise DataError("selections and realized returns are misaligned")
    scores = []
    skipped = 0
    for sel, month in zip(selections, realized):
        basket = set(month.index)
        n = len(sel)
        if n == 0:
            skipped += 1
            continue
        if not sel <= basket:
            raise DataError("selection contains assets outside the month's basket")
        vals = month.to_numpy(dtype=float)
        outperf = set(month.index[vals > vals.mean()])
        k = len(sel & outperf)
        p = len(outperf) / len(basket)
        scores.append(float(binom.cdf(k - 1, n, p)))
    if not scores:
        raise DataError("no months with nonempty selections")
    return FidelityResult(
        value=float(np.mean(scores)), months_used=len(scores), months_skipped=skipped
    )


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------

REPORT_COLUMNS = (
    "strategy",
    "n_months",
    "annualized_return",
    "sharpe",
    "max_up",
    "max_dd",
    "months_plus",
    "fidelity",
    "max_peak_trough_dd",
)


@dataclass(frozen=True)
class ReportRow:
    strategy: str
    n_months: int
    annualized_return: Optional[float]
    sharpe: Optional[float]
    max_up: Optional[float]
    max_dd: Optional[float]
    months_plus: Optional[int]
    fidelity: Optional[float]
    max_peak_trough_dd: Optional[float]


def build_report(run: BacktestRun, panel: PanelData) -> Tuple[ReportRow, ...]:
    """Summary metrics per strategy. Months+ is measured against EW (blank for
    EW itself); Fidelity applies only to the selecting strategies (EF, RC,
    RC*) and stays blank for EW and MIX, which have no selection set."""
    baseline = run.curves.get("EW")
    if baseline is None:
        baseline = ew_baseline_curve(run, panel)
    rows = []
    for s in run.strategies:
        curve = run.curves[s]

        def _try(fn, *args):
            try:
                return fn(*args)
            except DataError:
                return None

        up_dd = _try(metric_max_up_dd, curve)
        months_plus = None
        if s != "EW" and baseline is not None and curve.dates == baseline.dates:
            months_plus = metric_months_plus(curve, baseline)
        fidelity = None
        if s in run.selections:
            result = _try(metric_fidelity, run.selections[s], run.month_asset_returns)
            fidelity = result.value if result is not None else None
        rows.append(
            ReportRow(
                strategy=s,
                n_months=curve.period_returns.size,
                annualized_return=_try(metric_annualized_return, curve),
                sharpe=_try(metric_sharpe, curve, run.rf_period_returns),
                max_up=up_dd[0] if up_dd else None,
                max_dd=up_dd[1] if up_dd else None,
                months_plus=months_plus,
                fidelity=fidelity,
                max_peak_trough_dd=_try(metric_peak_trough_dd, curve),
            )
        )
    return tuple(rows)


def ew_baseline_curve(run: BacktestRun, panel: PanelData) -> EquityCurve:
    """EW curve over the run's schedule, for Months+ when EW was not requested."""
    ret_vals = panel.returns.to_numpy()
    rets = []
    for point in run.schedule.points:
        hold = slice(point.pos + 1, point.hold_end_pos + 1)
        growth = np.prod(1.0 + ret_vals[hold], axis=0)
        rets.append(float(growth.mean() - 1.0))
    return _curve("EW", [p.hold_end for p in run.schedule.points], rets)
