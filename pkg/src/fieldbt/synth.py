"""Deterministic synthetic panel generator.

Assets follow a linear factor model with idiosyncratic noise. Optional
features: an asymmetric jump mixture that injects negative skew, and a
planted lagged signal where each trading year's per-asset drift is a linear
function of the previous year's realized (cross-sectionally z-scored)
volatility and market beta, plus cross-sectional noise. A per-year schedule
of volatility-drift coefficients can script crash/rebound regimes.

Config keys (flat file or mapping): n_assets, n_days, n_factors, loadings,
idio_vol, skew_mix, planted_coeffs, noise_vol, regime_drifts, start,
riskfree_yield, market_drift. ``loadings`` is either a single value (all
assets share it) or "lo,hi" uniform bounds; ``planted_coeffs`` is
"c_sigma,c_beta"; ``regime_drifts`` is a comma list of per-year sigma
coefficients that overrides c_sigma year by year.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from fieldbt.data import (
    BENCHMARK_NAMES,
    FUNDAMENTAL_FIELDS,
    TRADING_DAYS_PER_YEAR,
    FundamentalPanel,
    PanelData,
)
from fieldbt.errors import ConfigError
from fieldbt.flatfile import parse_flat_file

MARKET_VOL = 0.008
SECONDARY_FACTOR_VOL = 0.005
FUNDAMENTAL_REPORT_EVERY = 21
JUMP_SIZE_MULTIPLE = 4.0


def _parse_floats(value, key: str) -> Tuple[float, ...]:
    if isinstance(value, (list, tuple, np.ndarray)):
        items = list(value)
    else:
        items = [v for v in str(value).split(",") if v.strip() != ""]
    try:
        return tuple(float(v) for v in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"synth config key {key!r}: cannot parse {value!r}") from exc


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic panel."""

    n_assets: int
    n_days: int
    n_factors: int = 1
    loadings: Tuple[float, ...] = (0.5, 1.5)
    idio_vol: float = 0.01
    skew_mix: float = 0.0
    planted_coeffs: Optional[Tuple[float, float]] = None
    noise_vol: float = 0.0
    regime_drifts: Optional[Tuple[float, ...]] = None
    start: str = "2000-01-03"
    riskfree_yield: float = 0.02
    market_drift: float = 2e-4

    def __post_init__(self) -> None:
        if self.n_assets <= 0 or self.n_days <= 0:
            raise ConfigError("n_assets and n_days must be positive")
        if self.n_assets < 2:
            raise ConfigError("synthetic panels need at least 2 assets")
        if self.n_days < 3:
            raise ConfigError("synthetic panels need at least 3 days")
        if self.n_factors < 1:
            raise ConfigError("n_factors must be at least 1")
        if len(self.loadings) not in (1, 2):
            raise ConfigError("loadings must be a single value or lo,hi bounds")
        if self.idio_vol < 0 or self.noise_vol < 0:
            raise ConfigError("volatilities must be nonnegative")
        if not (0.0 <= self.skew_mix <= 1.0):
            raise ConfigError("skew_mix must be in [0, 1]")
        if self.planted_coeffs is not None and len(self.planted_coeffs) != 2:
            raise ConfigError("planted_coeffs must be 'c_sigma,c_beta'")

    @classmethod
    def from_mapping(cls, raw: Mapping[str, object]) -> "SynthConfig":
        known = {
            "n_assets", "n_days", "n_factors", "loadings", "idio_vol", "skew_mix",
            "planted_coeffs", "noise_vol", "regime_drifts", "start",
            "riskfree_yield", "market_drift",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        for req in ("n_assets", "n_days"):
            if req not in raw:
                raise ConfigError(f"synth config missing required key {req!r}")
        kwargs: dict = {}
        try:
            kwargs["n_assets"] = int(raw["n_assets"])
            kwargs["n_days"] = int(raw["n_days"])
            if "n_factors" in raw:
                kwargs["n_factors"] = int(raw["n_factors"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"synth config integer field invalid: {exc}") from exc
        if "loadings" in raw:
            kwargs["loadings"] = _parse_floats(raw["loadings"], "loadings")
        for key in ("idio_vol", "skew_mix", "noise_vol", "riskfree_yield", "market_drift"):
            if key in raw:
                vals = _parse_floats(raw[key], key)
                if len(vals) != 1:
                    raise ConfigError(f"synth config key {key!r} takes one value")
                kwargs[key] = vals[0]
        if "planted_coeffs" in raw and raw["planted_coeffs"] not in (None, ""):
            vals = _parse_floats(raw["planted_coeffs"], "planted_coeffs")
            if len(vals) != 2:
                raise ConfigError("planted_coeffs must be 'c_sigma,c_beta'")
            kwargs["planted_coeffs"] = vals
        if "regime_drifts" in raw and raw["regime_drifts"] not in (None, ""):
            kwargs["regime_drifts"] = _parse_floats(raw["regime_drifts"], "regime_drifts")
        if "start" in raw:
            kwargs["start"] = str(raw["start"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SynthConfig":
        return cls.from_mapping(parse_flat_file(path))


def _zscore(v: np.ndarray) -> np.ndarray:
    sd = v.std()
    if sd == 0:
        return np.zeros_like(v)
    return (v - v.mean()) / sd


def generate_synthetic_panel(config: SynthConfig, seed: int) -> PanelData:
    """Build a PanelData deterministically from (config, seed)."""
    rng = np.random.default_rng(seed)
    n, t = config.n_assets, config.n_days
    n_ret = t - 1

    base_prices = 100.0 * np.exp(rng.uniform(-0.5, 0.5, size=n))
    if len(config.loadings) == 1:
        market_load = np.full(n, config.loadings[0])
    else:
        lo, hi = config.loadings
        market_load = rng.uniform(lo, hi, size=n)
    other_load = rng.uniform(-0.3, 0.3, size=(config.n_factors - 1, n))

    factors = np.empty((n_ret, config.n_factors))
    factors[:, 0] = rng.normal(config.market_drift, MARKET_VOL, size=n_ret)
    for k in range(1, config.n_factors):
        factors[:, k] = rng.normal(0.0, SECONDARY_FACTOR_VOL, size=n_ret)

    idio = rng.normal(0.0, config.idio_vol, size=(n_ret, n)) if config.idio_vol > 0 else np.zeros((n_ret, n))
    if config.skew_mix > 0 and config.idio_vol > 0:
        jumps = rng.random(size=(n_ret, n)) < config.skew_mix
        jump_size = JUMP_SIZE_MULTIPLE * config.idio_vol
        # Negative jumps with a mean-compensating shift keep E[shock] ~ 0.
        idio = idio - jumps * jump_size + config.skew_mix * jump_size

    aux = rng.normal(0.0, 1.0, size=(n_ret, 8))

    loadings = np.vstack([market_load[None, :], other_load]) if config.n_factors > 1 else market_load[None, :]
    systematic = factors @ loadings

    planted = config.planted_coeffs is not None or config.regime_drifts is not None
    c_sigma_default = config.planted_coeffs[0] if config.planted_coeffs else 0.0
    c_beta = config.planted_coeffs[1] if config.planted_coeffs else 0.0

    returns = np.empty((n_ret, n))
    block = TRADING_DAYS_PER_YEAR
    n_years = (n_ret + block - 1) // block
    for y in range(n_years):
        lo_row, hi_row = y * block, min((y + 1) * block, n_ret)
        drift = np.zeros(n)
        if planted and y >= 1:
            prev = returns[(y - 1) * block : y * block]
            mkt = factors[(y - 1) * block : y * block, 0]
            sig = prev.std(axis=0, ddof=1)
            mkt_c = mkt - mkt.mean()
            denom = float(mkt_c @ mkt_c)
            bet = (prev - prev.mean(axis=0)).T @ mkt_c / denom if denom > 0 else np.zeros(n)
            c_sigma = c_sigma_default
            if config.regime_drifts is not None:
                c_sigma = config.regime_drifts[y] if y < len(config.regime_drifts) else 0.0
            drift = c_sigma * _zscore(sig) + c_beta * _zscore(bet)
            if config.noise_vol > 0:
                drift = drift + rng.normal(0.0, config.noise_vol, size=n)
        returns[lo_row:hi_row] = drift[None, :] + systematic[lo_row:hi_row] + idio[lo_row:hi_row]

    np.clip(returns, -0.95, None, out=returns)

    calendar = pd.bdate_range(config.start, periods=t)
    asset_ids = [f"A{i:03d}" for i in range(n)]
    growth = np.vstack([np.ones(n), np.cumprod(1.0 + returns, axis=0)])
    prices = pd.DataFrame(base_prices[None, :] * growth, index=calendar, columns=asset_ids)

    f2 = factors[:, 1] if config.n_factors >= 2 else aux[:, 0]
    f3 = factors[:, 2] if config.n_factors >= 3 else aux[:, 7]
    bench = pd.DataFrame(
        {
            "MARKET": factors[:, 0],
            "OIL": 0.4 * f2 + 0.006 * aux[:, 1],
            "VIX": -1.2 * factors[:, 0] + 0.008 * aux[:, 2],
            "Y10": 0.03 * factors[:, 0] + 0.0006 * aux[:, 3],
            "VALUE": 0.5 * f2 + 0.3 * factors[:, 0] + 0.004 * aux[:, 4],
            "GROWTH": 0.7 * factors[:, 0] - 0.3 * f2 + 0.004 * aux[:, 5],
            "MOMENTUM": 0.6 * factors[:, 0] + 0.2 * f3 + 0.005 * aux[:, 6],
        },
        index=calendar[1:],
    )[list(BENCHMARK_NAMES)]

    fundamentals = _synth_fundamentals(rng, calendar, asset_ids)
    riskfree = pd.Series(config.riskfree_yield, index=calendar, name="annual_yield")

    return PanelData(
        calendar=calendar,
        prices=prices,
        fundamentals=fundamentals,
        benchmarks=bench,
        riskfree=riskfree,
    )


def _synth_fundamentals(rng, calendar: pd.DatetimeIndex, asset_ids) -> FundamentalPanel:
    n = len(asset_ids)
    t = len(calendar)
    report_rows = np.arange(0, t, FUNDAMENTAL_REPORT_EVERY)
    n_reports = report_rows.size

    cap0 = np.exp(rng.normal(np.log(1e9), 1.0, size=n))
    ev0 = cap0 * rng.uniform(0.9, 1.6, size=n)
    initial = {
        "cap": cap0,
        "mtb": rng.uniform(0.5, 5.0, size=n),
        "ev": ev0,
        "div_yield": rng.uniform(0.005, 0.06, size=n),
        "ebitda": ev0 / rng.uniform(6.0, 16.0, size=n),
    }

    values = {}
    reported = {}
    for field in FUNDAMENTAL_FIELDS:
        steps = rng.normal(0.0, 0.03, size=(n_reports, n))
        steps[0] = 0.0
        walk = initial[field][None, :] * np.exp(np.cumsum(steps, axis=0))
        frame = pd.DataFrame(np.nan, index=calendar, columns=list(asset_ids))
        frame.iloc[report_rows] = walk
        mask = pd.DataFrame(False, index=calendar, columns=list(asset_ids))
        mask.iloc[report_rows] = True
        values[field] = frame
        reported[field] = mask
    return FundamentalPanel(values=values, reported=reported)


def render_panel_csvs(panel: PanelData) -> dict:
    """Render a panel to the four input CSV texts (keyed by filename)."""
    date_str = panel.calendar.strftime("%Y-%m-%d")

    lines = ["date,asset_id,close"]
    price_vals = panel.prices.to_numpy()
    for i, d in enumerate(date_str):
        for j, a in enumerate(panel.assets):
            lines.append(f"{d},{a},{float(price_vals[i, j])!r}")
    prices_csv = "\n".join(lines) + "\n"

    lines = ["date,asset_id," + ",".join(FUNDAMENTAL_FIELDS)]
    frames = {f: panel.fundamentals.values[f].to_numpy() for f in FUNDAMENTAL_FIELDS}
    masks = {f: panel.fundamentals.reported[f].to_numpy() for f in FUNDAMENTAL_FIELDS}
    for i, d in enumerate(date_str):
        for j, a in enumerate(panel.assets):
            cells = []
            any_reported = False
            for f in FUNDAMENTAL_FIELDS:
                if masks[f][i, j] and np.isfinite(frames[f][i, j]):
                    cells.append(repr(float(frames[f][i, j])))
                    any_reported = True
                else:
                    cells.append("")
            if any_reported:
                lines.append(f"{d},{a}," + ",".join(cells))
    fundamentals_csv = "\n".join(lines) + "\n"

    # Benchmarks are stored as returns; export compounded levels starting at 1.
    lines = ["date,name,close"]
    bench_levels = {}
    for name in BENCHMARK_NAMES:
        rets = panel.benchmarks[name].to_numpy()
        if name == "Y10":
            # Levels for Y10 are cumulative yield changes from a 2% base.
            bench_levels[name] = 0.02 + np.concatenate([[0.0], np.cumsum(rets)])
        else:
            bench_levels[name] = np.concatenate([[1.0], np.cumprod(1.0 + rets)])
    for i, d in enumerate(date_str):
        for name in BENCHMARK_NAMES:
            lines.append(f"{d},{name},{float(bench_levels[name][i])!r}")
    benchmarks_csv = "\n".join(lines) + "\n"

    lines = ["date,annual_yield"]
    rf = panel.riskfree.to_numpy()
    for i, d in enumerate(date_str):
        lines.append(f"{d},{float(rf[i])!r}")
    riskfree_csv = "\n".join(lines) + "\n"

    return {
        "prices.csv": prices_csv,
        "fundamentals.csv": fundamentals_csv,
        "benchmarks.csv": benchmarks_csv,
        "riskfree.csv": riskfree_csv,
    }
