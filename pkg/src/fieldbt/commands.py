"""Run configuration and the three engine commands (synth, study, backtest).

Commands render every output in memory first and then move the files into
place through a temp directory, so a failing run leaves no partial report
set. All output is byte-deterministic for a fixed config and seed.

Both the CLI and the HTTP service call into this module.
"""

from __future__ import annotations

import json
import os
import tempfile
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple

import pandas as pd

from fieldbt.backtest import (
    REPORT_COLUMNS,
    build_report,
    parse_strategies,
    run_backtest,
)
from fieldbt.data import PanelData, load_panel
from fieldbt.errors import ConfigError, DataError
from fieldbt.fields import ALL_FIELDS, FieldSpec, correlation_study
from fieldbt.synth import SynthConfig, generate_synthetic_panel, render_panel_csvs

STUDY_WINDOW_ROWS = 252

PANEL_FILE_KEYS = ("prices", "fundamentals", "benchmarks", "riskfree")


@dataclass(frozen=True)
class RunConfig:
    """One command invocation: data source, range, selections, output, seed."""

    out: str
    prices: Optional[str] = None
    fundamentals: Optional[str] = None
    benchmarks: Optional[str] = None
    riskfree: Optional[str] = None
    synth_config: Optional[str] = None
    synth_params: Optional[Mapping[str, object]] = None
    date_from: Optional[str] = None
    date_to: Optional[str] = None
    fields: Optional[Tuple[str, ...]] = None
    strategies: Tuple[str, ...] = ("EW", "EF", "RC", "MIX", "RC*")
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.out:
            raise ConfigError("output directory is required")
        for d in (self.date_from, self.date_to):
            if d is not None:
                try:
                    pd.Timestamp(d)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"invalid date {d!r}") from exc
        if self.date_from and self.date_to:
            if pd.Timestamp(self.date_from) > pd.Timestamp(self.date_to):
                raise ConfigError(
                    f"empty date range: {self.date_from} > {self.date_to}"
                )
        if self.uses_synth and self.seed is None:
            raise ConfigError("a seed is required when synthetic data is used")

    @property
    def uses_synth(self) -> bool:
        return self.synth_config is not None or self.synth_params is not None

    @classmethod
    def from_mapping(cls, raw: Mapping[str, object]) -> "RunConfig":
        known = {
            "prices", "fundamentals", "benchmarks", "riskfree", "synth_config",
            "synth_params", "from", "to", "fields", "strategies", "out", "seed",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        fields = raw.get("fields")
        if isinstance(fields, str):
            fields = tuple(t.strip().upper() for t in fields.split(",") if t.strip())
        elif fields is not None:
            fields = tuple(str(t).upper() for t in fields)
        strategies = raw.get("strategies")
        if isinstance(strategies, str):
            strategies = tuple(t.strip() for t in strategies.split(",") if t.strip())
        elif strategies is None:
            strategies = ("EW", "EF", "RC", "MIX", "RC*")
        else:
            strategies = tuple(str(t) for t in strategies)
        seed = raw.get("seed")
        if seed is not None:
            try:
                seed = int(seed)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid seed {seed!r}") from exc
        out = raw.get("out")
        if out is None:
            raise ConfigError("config key 'out' is required")
        return cls(
            out=str(out),
            prices=_opt_str(raw.get("prices")),
            fundamentals=_opt_str(raw.get("fundamentals")),
            benchmarks=_opt_str(raw.get("benchmarks")),
            riskfree=_opt_str(raw.get("riskfree")),
            synth_config=_opt_str(raw.get("synth_config")),
            synth_params=raw.get("synth_params"),
            date_from=_opt_str(raw.get("from")),
            date_to=_opt_str(raw.get("to")),
            fields=fields,
            strategies=strategies,
            seed=seed,
        )


def _opt_str(value) -> Optional[str]:
    return None if value in (None, "") else str(value)


def _fmt(x) -> str:
    return repr(float(x))


def _fmt_cell(x) -> str:
    return "-" if x is None else (_fmt(x) if isinstance(x, float) else str(x))


def _synth_config(cfg: RunConfig) -> SynthConfig:
    if cfg.synth_params is not None:
        return SynthConfig.from_mapping(cfg.synth_params)
    return SynthConfig.from_file(cfg.synth_config)


def load_config_panel(cfg: RunConfig) -> PanelData:
    """Panel from the configured source: synth (config+seed) or the four CSVs."""
    if cfg.uses_synth:
        return generate_synthetic_panel(_synth_config(cfg), seed=cfg.seed)
    missing = [k for k in PANEL_FILE_KEYS if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(
            f"panel input files missing: {missing}; provide them or a synth config"
        )
    return load_panel(cfg.prices, cfg.fundamentals, cfg.benchmarks, cfg.riskfree)


def _write_atomically(out_dir: str, payloads: Mapping[str, str]) -> Dict[str, str]:
    """Write all payloads or none: render to a temp dir, then move into place."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".fieldbt-{uuid.uuid4().hex[:8]}-", dir=out))
    written = {}
    try:
        staged = []
        for name, text in payloads.items():
            path = tmp / name
            path.write_text(text)
            staged.append((path, out / name))
        for src, dst in staged:
            os.replace(src, dst)
            written[dst.name] = str(dst)
    finally:
        for leftover in tmp.glob("*"):
            leftover.unlink()
        tmp.rmdir()
    return written


@dataclass(frozen=True)
class CommandResult:
    files: Dict[str, str]
    summary: dict = field(default_factory=dict)


def cmd_synth(cfg: RunConfig) -> CommandResult:
    """Generate a synthetic panel and write the four CSV inputs."""
    if not cfg.uses_synth:
        raise ConfigError("synth command requires a synth config")
    synth_cfg = _synth_config(cfg)
    panel = generate_synthetic_panel(synth_cfg, seed=cfg.seed)
    files = _write_atomically(cfg.out, render_panel_csvs(panel))
    return CommandResult(
        files=files,
        summary={
            "n_assets": panel.n_assets,
            "n_days": len(panel.calendar),
            "seed": cfg.seed,
        },
    )


def _study_windows(panel: PanelData, cfg: RunConfig):
    rets = panel.returns
    lo = pd.Timestamp(cfg.date_from) if cfg.date_from else rets.index[0]
    hi = pd.Timestamp(cfg.date_to) if cfg.date_to else rets.index[-1]
    idx = rets.loc[lo:hi].index
    if len(idx) < 2 * STUDY_WINDOW_ROWS:
        raise DataError(
            f"study needs {2 * STUDY_WINDOW_ROWS} return days in range, found {len(idx)}"
        )
    window_a = (idx[0], idx[STUDY_WINDOW_ROWS - 1])
    window_b = (idx[STUDY_WINDOW_ROWS], idx[2 * STUDY_WINDOW_ROWS - 1])
    return window_a, window_b


def _study_csv(rows) -> str:
    lines = ["field,leg,rho,ci_low,ci_high,n"]
    for r in rows:
        lines.append(
            f"{r['field']},{r['leg']},{_fmt(r['rho'])},{_fmt(r['ci_low'])},"
            f"{_fmt(r['ci_high'])},{r['n']}"
        )
    return "\n".join(lines) + "\n"


def cmd_study(cfg: RunConfig) -> CommandResult:
    """Run the two-leg correlation study over two adjacent annual windows."""
    panel = load_config_panel(cfg)
    spec = FieldSpec(cfg.fields) if cfg.fields else ALL_FIELDS
    window_a, window_b = _study_windows(panel, cfg)
    report = correlation_study(panel, window_a, window_b, spec)
    payloads = {
        "study_contemporary.csv": _study_csv(report.csv_rows("contemporary")),
        "study_lagged.csv": _study_csv(report.csv_rows("lagged")),
        "study.json": report.to_json(),
    }
    files = _write_atomically(cfg.out, payloads)
    return CommandResult(files=files, summary=report.to_json_dict())


def _curves_csv(run) -> str:
    lines = ["date,strategy,period_return,compounded_value"]
    for strategy in run.strategies:
        curve = run.curves[strategy]
        for d, r, v in zip(curve.dates, curve.period_returns, curve.values):
            lines.append(f"{d.date()},{strategy},{_fmt(r)},{_fmt(v)}")
    return "\n".join(lines) + "\n"


def _report_csv(rows) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for r in rows:
        lines.append(
            ",".join(
                _fmt_cell(getattr(r, col)) if col != "strategy" else r.strategy
                for col in REPORT_COLUMNS
            )
        )
    return "\n".join(lines) + "\n"


def _report_json(rows) -> str:
    payload = [
        {col: getattr(r, col) for col in REPORT_COLUMNS}
        for r in rows
    ]
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _diagnostics_json(run, panel) -> str:
    months = []
    for rec in run.records:
        months.append(
            {
                "date": str(rec.date.date()),
                "universe_size": rec.universe_size,
                "dropped_assets": dict(rec.dropped_assets),
                "dropped_fields": list(rec.dropped_fields),
                "adaptive_flip": rec.adaptive.flip if rec.adaptive else None,
                "adaptive_trigger": rec.adaptive.trigger if rec.adaptive else None,
                "frontier_converged": rec.frontier_converged,
                "r_squared": rec.r_squared,
            }
        )
    payload = {
        "months": months,
        "panel_diagnostics": list(panel.diagnostics),
        "n_rebalances": len(run.records),
        "strategies": list(run.strategies),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def cmd_backtest(cfg: RunConfig) -> CommandResult:
    """Run the monthly backtest and write curves, report, and diagnostics."""
    panel = load_config_panel(cfg)
    strategies = parse_strategies(cfg.strategies)
    run = run_backtest(
        panel,
        strategies,
        start=pd.Timestamp(cfg.date_from) if cfg.date_from else None,
        end=pd.Timestamp(cfg.date_to) if cfg.date_to else None,
    )
    rows = build_report(run, panel)
    payloads = {
        "curves.csv": _curves_csv(run),
        "report.csv": _report_csv(rows),
        "report.json": _report_json(rows),
        "diagnostics.json": _diagnostics_json(run, panel),
    }
    files = _write_atomically(cfg.out, payloads)
    summary = {
        "report": json.loads(_report_json(rows)),
        "n_rebalances": len(run.records),
    }
    return CommandResult(files=files, summary=summary)
