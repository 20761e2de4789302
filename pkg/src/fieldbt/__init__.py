"""Explanatory-field analytics and long-only allocation backtesting for stock panels."""

__version__ = "0.1.0"

from fieldbt.allocation import (
    AdaptiveState,
    FrontierSolution,
    WeightVector,
    adaptive_trigger,
    ef_select,
    ew_weights,
    mix_weights,
    rc_select,
    solve_frontier,
    weights_to_csv,
)
from fieldbt.backtest import (
    BacktestRun,
    EquityCurve,
    RebalanceSchedule,
    build_report,
    build_schedule,
    metric_annualized_return,
    metric_fidelity,
    metric_max_up_dd,
    metric_months_plus,
    metric_sharpe,
    run_backtest,
)
from fieldbt.data import PanelData, excess_returns, load_panel, to_returns
from fieldbt.errors import ConfigError, DataError, EngineError, NumericalError
from fieldbt.factors import (
    CrossPairIndex,
    FactorIndex,
    build_factor_index,
    cross_pair_index,
    cross_pair_series,
)
from fieldbt.fields import (
    ALL_FIELDS,
    TEN_FACTORS,
    CorrelationReport,
    FieldMatrix,
    FieldSpec,
    compute_fields,
    correlation_study,
)
from fieldbt.regression import RegressionModel, fit, flip_coefficients, predict
from fieldbt.synth import SynthConfig, generate_synthetic_panel

__all__ = [
    "ALL_FIELDS",
    "AdaptiveState",
    "BacktestRun",
    "ConfigError",
    "CorrelationReport",
    "CrossPairIndex",
    "DataError",
    "EngineError",
    "EquityCurve",
    "FactorIndex",
    "FieldMatrix",
    "FieldSpec",
    "FrontierSolution",
    "NumericalError",
    "PanelData",
    "RebalanceSchedule",
    "RegressionModel",
    "SynthConfig",
    "TEN_FACTORS",
    "WeightVector",
    "__version__",
    "adaptive_trigger",
    "build_factor_index",
    "build_report",
    "build_schedule",
    "compute_fields",
    "correlation_study",
    "cross_pair_index",
    "cross_pair_series",
    "ef_select",
    "ew_weights",
    "excess_returns",
    "fit",
    "flip_coefficients",
    "generate_synthetic_panel",
    "load_panel",
    "metric_annualized_return",
    "metric_fidelity",
    "metric_max_up_dd",
    "metric_months_plus",
    "metric_sharpe",
    "mix_weights",
    "predict",
    "rc_select",
    "run_backtest",
    "solve_frontier",
    "to_returns",
    "weights_to_csv",
]
