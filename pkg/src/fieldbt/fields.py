"""Per-asset explanatory fields over a window, and the field-vs-return
correlation study (contemporary and lagged legs with confidence intervals).

Fields are computed on excess returns. Benchmark driver series are used as
given, except the market benchmark which is also converted to excess returns;
the four fundamental factor indexes are built from the panel itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fieldbt.data import PanelData
from fieldbt.errors import DataError
from fieldbt.factors import FACTOR_FIELDS, build_factor_index, monthly_schedule
from fieldbt.stats import CorrelationEstimate, fisher_ci

BASE_FIELDS = ("SHARPE", "MEAN", "SKEW", "SKEW_STAR", "RHO_PAIRS", "SIGMA")
DRIVER_NAMES = (
    "MARKET", "VIX", "OIL", "Y10", "MOMENTUM", "GROWTH", "VALUE",
    "DIVYIELD", "EV", "MTB", "EVEBITDA",
)
BASKET_DRIVER = "__BASKET__"

RECOGNIZED_FIELDS = BASE_FIELDS + tuple(
    f"{kind}_{name}" for name in DRIVER_NAMES for kind in ("RHO", "BETA")
)

MIN_WINDOW_DAYS = 60


@dataclass(frozen=True)
class FieldSpec:
    """Ordered list of explanatory field identifiers."""

    fields: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.fields:
            raise DataError("field spec is empty")
        unknown = [f for f in self.fields if f not in RECOGNIZED_FIELDS]
        if unknown:
            raise DataError(f"unrecognized field identifiers: {unknown}")
        if len(set(self.fields)) != len(self.fields):
            raise DataError("duplicate field identifiers in spec")

    @classmethod
    def parse(cls, tokens: Sequence[str]) -> "FieldSpec":
        return cls(tuple(t.strip().upper() for t in tokens if t.strip()))


# The lagged multi-regression uses this distinguished ten-field set.
TEN_FACTORS = FieldSpec(
    (
        "SKEW_STAR", "SIGMA",
        "BETA_MARKET", "BETA_MOMENTUM", "BETA_GROWTH", "BETA_Y10", "BETA_VIX",
        "BETA_DIVYIELD", "BETA_EV", "BETA_MTB",
    )
)

ALL_FIELDS = FieldSpec(RECOGNIZED_FIELDS)


@dataclass(frozen=True)
class FieldMatrix:
    """Assets x fields values for one window, with drop diagnostics."""

    start: pd.Timestamp
    end: pd.Timestamp
    field_names: Tuple[str, ...]
    assets: Tuple[str, ...]
    values: np.ndarray
    dropped: Mapping[str, str]

    def as_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=list(self.assets), columns=list(self.field_names))

    def column(self, name: str) -> np.ndarray:
        if name not in self.field_names:
            raise DataError(f"field {name!r} not in matrix")
        return self.values[:, self.field_names.index(name)]


def drivers_for_spec(spec: FieldSpec) -> Tuple[str, ...]:
    """Driver series names a field spec needs."""
    names = []
    for field in spec.fields:
        if field == "RHO_PAIRS":
            names.append(BASKET_DRIVER)
        elif field.startswith(("BETA_", "RHO_")):
            names.append(field.split("_", 1)[1])
    return tuple(dict.fromkeys(names))


def build_drivers(
    panel: PanelData,
    schedule: Optional[Sequence[pd.Timestamp]] = None,
    names: Optional[Sequence[str]] = None,
) -> Dict[str, pd.Series]:
    """Assemble driver series used for RHO_*/BETA_* fields, on the returns index.

    Built once per panel and reused across windows: the market excess series,
    the six other input benchmarks as given, the four fundamental factor
    indexes (refreshed on the monthly schedule), and the equal-weighted
    basket series that backs RHO_PAIRS. ``names`` restricts construction to
    the listed drivers (factor indexes are the expensive ones).
    """
    if schedule is None:
        schedule = monthly_schedule(panel)
    if names is None:
        names = ("MARKET", "VIX", "OIL", "Y10", "MOMENTUM", "GROWTH", "VALUE") + tuple(
            FACTOR_FIELDS
        ) + (BASKET_DRIVER,)
    drivers: Dict[str, pd.Series] = {}
    for name in names:
        if name == BASKET_DRIVER:
            drivers[name] = panel.basket_returns
        elif name in FACTOR_FIELDS:
            drivers[name] = build_factor_index(panel, name, schedule=schedule).returns
        elif name in panel.benchmarks.columns:
            series = panel.benchmarks[name]
            if name == "MARKET":
                series = series - panel.riskfree_daily
            drivers[name] = series.rename(name)
        else:
            raise DataError(f"unknown driver series {name!r}")
    return drivers


def _window_slice(frame, window) -> pd.DataFrame:
    start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    if start > end:
        raise DataError(f"window start {start.date()} after end {end.date()}")
    return frame.loc[start:end]


def _batched_revised_skewness(z: np.ndarray) -> np.ndarray:
    """Column-wise revised skewness of standardized matrices."""
    n = z.shape[0]
    idx = np.broadcast_to(np.arange(n)[:, None], z.shape)
    order = np.lexsort((idx, z >= 0, np.abs(z)), axis=0)
    sorted_z = np.take_along_axis(z, order, axis=0)
    return -(2.0 / (n * n)) * np.cumsum(sorted_z, axis=0).sum(axis=0)


def compute_fields(
    panel: PanelData,
    window,
    spec: FieldSpec,
    drivers: Optional[Mapping[str, pd.Series]] = None,
) -> FieldMatrix:
    """Measure every requested field for every asset over one window.

    Assets with any undefined field value (zero volatility, for instance) are
    dropped from the matrix and recorded in the diagnostics.
    """
    if drivers is None:
        drivers = build_drivers(panel, names=drivers_for_spec(spec))
    ret_index = panel.excess.index
    start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    if start > end:
        raise DataError(f"window start {start.date()} after end {end.date()}")
    lo = int(ret_index.searchsorted(start))
    hi = int(ret_index.searchsorted(end, side="right"))
    excess = panel.excess.iloc[lo:hi]
    n_days = len(excess)
    if n_days < MIN_WINDOW_DAYS:
        raise DataError(f"window too short: {n_days} return days < {MIN_WINDOW_DAYS}")

    e = excess.to_numpy()
    n = e.shape[1]
    means = e.mean(axis=0)
    centered = e - means
    ss = np.einsum("ij,ij->j", centered, centered)
    # An exactly constant column must read as zero variance despite rounding
    # noise from the mean subtraction.
    constant = np.ptp(e, axis=0) == 0.0
    ss[constant] = 0.0
    centered[:, constant] = 0.0
    sds = np.sqrt(ss / (n_days - 1))
    m2 = ss / n_days

    driver_cache: Dict[str, np.ndarray] = {}

    def driver_window(name: str) -> np.ndarray:
        if name not in driver_cache:
            if name not in drivers:
                raise DataError(f"benchmark driver {name!r} missing")
            full = drivers[name]
            if len(full) == len(ret_index) and full.index[0] == ret_index[0]:
                series = full.to_numpy(dtype=float)[lo:hi]
            else:
                series = _window_slice(full, window).to_numpy(dtype=float)
            if series.shape[0] != n_days:
                raise DataError(f"driver {name!r} does not cover the window")
            if not np.all(np.isfinite(series)):
                raise DataError(f"driver {name!r} has missing values on the window")
            if np.ptp(series) == 0.0:
                raise DataError(f"driver {name!r} is constant on the window")
            driver_cache[name] = series
        return driver_cache[name]

    def beta_against(name: str) -> np.ndarray:
        d = driver_window(name)
        dc = d - d.mean()
        return centered.T @ dc / float(dc @ dc)

    def rho_against(name: str) -> np.ndarray:
        d = driver_window(name)
        dc = d - d.mean()
        denom = np.sqrt(ss * float(dc @ dc))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(denom > 0, centered.T @ dc / denom, np.nan)
        return np.clip(out, -1.0, 1.0)

    columns = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for field in spec.fields:
            if field == "MEAN":
                col = means.copy()
            elif field == "SIGMA":
                col = np.where(sds > 0, sds, np.nan) if np.any(sds == 0) else sds.copy()
            elif field == "SHARPE":
                col = np.where(sds > 0, means / sds, np.nan)
            elif field == "SKEW":
                m3 = np.einsum("ij,ij,ij->j", centered, centered, centered) / n_days
                col = np.where(m2 > 0, m3 / np.power(m2, 1.5), np.nan)
            elif field == "SKEW_STAR":
                sd_pop = np.sqrt(m2)
                z = np.where(sd_pop > 0, centered / sd_pop, np.nan)
                col = _batched_revised_skewness(z)
            elif field == "RHO_PAIRS":
                col = beta_against(BASKET_DRIVER)
            elif field.startswith("BETA_"):
                col = beta_against(field[len("BETA_"):])
            elif field.startswith("RHO_"):
                col = rho_against(field[len("RHO_"):])
            else:  # pragma: no cover - spec validation precludes this
                raise DataError(f"unhandled field {field!r}")
            columns.append(col)

    values = np.column_stack(columns)
    finite = np.isfinite(values).all(axis=1)
    dropped = {}
    for j in np.flatnonzero(~finite):
        bad = [spec.fields[k] for k in np.flatnonzero(~np.isfinite(values[j]))]
        dropped[panel.assets[j]] = f"undefined fields: {', '.join(bad)}"
    kept_assets = tuple(a for a, ok in zip(panel.assets, finite) if ok)
    return FieldMatrix(
        start=excess.index[0],
        end=excess.index[-1],
        field_names=spec.fields,
        assets=kept_assets,
        values=values[finite],
        dropped=dropped,
    )


@dataclass(frozen=True)
class FieldCorrelation:
    """Study result for one field: contemporary and lagged estimates."""

    field: str
    contemporary: CorrelationEstimate
    lagged: CorrelationEstimate


@dataclass(frozen=True)
class CorrelationReport:
    """Cross-sectional correlations of fields with window-average returns."""

    window_a: Tuple[pd.Timestamp, pd.Timestamp]
    window_b: Tuple[pd.Timestamp, pd.Timestamp]
    n_assets: int
    entries: Tuple[FieldCorrelation, ...]
    dropped_fields: Tuple[str, ...]
    dropped_assets: Mapping[str, str]

    def csv_rows(self, leg: str) -> list:
        if leg not in ("contemporary", "lagged"):
            raise DataError(f"unknown study leg {leg!r}")
        rows = []
        for entry in self.entries:
            est = getattr(entry, leg)
            rows.append(
                {
                    "field": entry.field,
                    "leg": leg,
                    "rho": est.rho,
                    "ci_low": est.ci_low,
                    "ci_high": est.ci_high,
                    "n": est.n,
                }
            )
        return rows

    def to_json_dict(self) -> dict:
        def est_dict(est: CorrelationEstimate) -> dict:
            return {"rho": est.rho, "ci_low": est.ci_low, "ci_high": est.ci_high, "n": est.n}

        return {
            "window_a": [str(self.window_a[0].date()), str(self.window_a[1].date())],
            "window_b": [str(self.window_b[0].date()), str(self.window_b[1].date())],
            "n_assets": self.n_assets,
            "fields": {
                e.field: {
                    "contemporary": est_dict(e.contemporary),
                    "lagged": est_dict(e.lagged),
                }
                for e in self.entries
            },
            "dropped_fields": list(self.dropped_fields),
            "dropped_assets": dict(self.dropped_assets),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def _cross_sectional_estimate(col: np.ndarray, target: np.ndarray, n: int) -> CorrelationEstimate:
    cc = col - col.mean()
    tc = target - target.mean()
    denom = float(cc @ cc) * float(tc @ tc)
    rho = float(np.clip(float(cc @ tc) / np.sqrt(denom), -1.0, 1.0))
    if abs(rho) >= 1.0:
        return CorrelationEstimate(rho=rho, ci_low=rho, ci_high=rho, n=n)
    return fisher_ci(rho, n)


def correlation_study(
    panel: PanelData,
    window_a,
    window_b,
    spec: FieldSpec,
    drivers: Optional[Mapping[str, pd.Series]] = None,
) -> CorrelationReport:
    """Correlate fields measured on window_a with mean excess returns on the
    same window (contemporary) and on the following window_b (lagged)."""
    a_start, a_end = pd.Timestamp(window_a[0]), pd.Timestamp(window_a[1])
    b_start, b_end = pd.Timestamp(window_b[0]), pd.Timestamp(window_b[1])
    if b_start <= a_end:
        raise DataError(
            f"lagged window must start after window_a ends "
            f"({b_start.date()} <= {a_end.date()})"
        )
    matrix = compute_fields(panel, (a_start, a_end), spec, drivers=drivers)
    if len(matrix.assets) < 4:
        raise DataError(f"only {len(matrix.assets)} assets retained; study needs >= 4")

    excess_a = _window_slice(panel.excess, (a_start, a_end))[list(matrix.assets)]
    excess_b = _window_slice(panel.excess, (b_start, b_end))[list(matrix.assets)]
    if len(excess_b) < 1:
        raise DataError("lagged window contains no return days")
    means_a = excess_a.mean(axis=0).to_numpy()
    means_b = excess_b.mean(axis=0).to_numpy()

    n = len(matrix.assets)
    entries = []
    dropped_fields = []
    if np.ptp(means_a) == 0.0 or np.ptp(means_b) == 0.0:
        raise DataError("mean returns have no cross-sectional variation")
    for k, field in enumerate(matrix.field_names):
        col = matrix.values[:, k]
        if np.ptp(col) <= 1e-12 * max(1e-30, float(np.abs(col).max())):
            dropped_fields.append(field)
            continue
        entries.append(
            FieldCorrelation(
                field=field,
                contemporary=_cross_sectional_estimate(col, means_a, n),
                lagged=_cross_sectional_estimate(col, means_b, n),
            )
        )
    return CorrelationReport(
        window_a=(matrix.start, matrix.end),
        window_b=(excess_b.index[0], excess_b.index[-1]),
        n_assets=n,
        entries=tuple(entries),
        dropped_fields=tuple(dropped_fields),
        dropped_assets=matrix.dropped,
    )
