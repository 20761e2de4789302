"""HTTP service wrapping the engine commands.

Endpoints mirror the three commands: POST /v1/synth, /v1/study, /v1/backtest,
plus GET /health. Requests carry the same keys as a run config; responses
return the written file paths and the command summary. Engine errors map to
HTTP statuses: config 400, data 422, numerical 500.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from fieldbt import __version__
from fieldbt.commands import RunConfig, cmd_backtest, cmd_study, cmd_synth
from fieldbt.errors import ConfigError, EngineError, NumericalError

app = FastAPI(title="fieldbt", version=__version__)


class SynthRequest(BaseModel):
    out: str
    seed: int
    synth_config: Optional[str] = Field(default=None, description="path to a flat config file")
    synth_params: Optional[Dict[str, Any]] = Field(
        default=None, description="inline synth config keys"
    )


class StudyRequest(BaseModel):
    out: str
    prices: Optional[str] = None
    fundamentals: Optional[str] = None
    benchmarks: Optional[str] = None
    riskfree: Optional[str] = None
    synth_config: Optional[str] = None
    synth_params: Optional[Dict[str, Any]] = None
    date_from: Optional[str] = None
    date_to: Optional[str] = None
    fields: Optional[List[str]] = None
    seed: Optional[int] = None


class BacktestRequest(StudyRequest):
    strategies: List[str] = ["EW", "EF", "RC", "MIX", "RC*"]


class HealthResponse(BaseModel):
    status: str
    version: str


class CommandResponse(BaseModel):
    files: Dict[str, str]
    summary: Dict[str, Any]


class ReportRowModel(BaseModel):
    strategy: str
    n_months: int
    annualized_return: Optional[float]
    sharpe: Optional[float]
    max_up: Optional[float]
    max_dd: Optional[float]
    months_plus: Optional[int]
    fidelity: Optional[float]
    max_peak_trough_dd: Optional[float]


class BacktestResponse(BaseModel):
    files: Dict[str, str]
    n_rebalances: int
    report: List[ReportRowModel]


@app.exception_handler(EngineError)
async def engine_error_handler(request: Request, exc: EngineError) -> JSONResponse:
    if isinstance(exc, ConfigError):
        status = 400
    elif isinstance(exc, NumericalError):
        status = 500
    else:
        status = 422
    return JSONResponse(
        status_code=status,
        content={"error": type(exc).__name__, "detail": str(exc)},
    )


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


def _to_config(payload: BaseModel) -> RunConfig:
    raw = payload.model_dump()
    mapping: Dict[str, Any] = {
        "out": raw.get("out"),
        "seed": raw.get("seed"),
        "synth_config": raw.get("synth_config"),
        "synth_params": raw.get("synth_params"),
    }
    for key in ("prices", "fundamentals", "benchmarks", "riskfree"):
        if raw.get(key) is not None:
            mapping[key] = raw[key]
    if raw.get("date_from") is not None:
        mapping["from"] = raw["date_from"]
    if raw.get("date_to") is not None:
        mapping["to"] = raw["date_to"]
    if raw.get("fields") is not None:
        mapping["fields"] = raw["fields"]
    if raw.get("strategies") is not None:
        mapping["strategies"] = raw["strategies"]
    return RunConfig.from_mapping(mapping)


@app.post("/v1/synth", response_model=CommandResponse)
def synth(payload: SynthRequest) -> CommandResponse:
    result = cmd_synth(_to_config(payload))
    return CommandResponse(files=result.files, summary=result.summary)


@app.post("/v1/study", response_model=CommandResponse)
def study(payload: StudyRequest) -> CommandResponse:
    result = cmd_study(_to_config(payload))
    return CommandResponse(files=result.files, summary=result.summary)


@app.post("/v1/backtest", response_model=BacktestResponse)
def backtest(payload: BacktestRequest) -> BacktestResponse:
    result = cmd_backtest(_to_config(payload))
    return BacktestResponse(
        files=result.files,
        n_rebalances=result.summary["n_rebalances"],
        report=[ReportRowModel(**row) for row in result.summary["report"]],
    )
