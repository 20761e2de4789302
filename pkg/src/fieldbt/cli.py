"""Command-line client for the engine.

Runs commands in-process by default; with --server it posts the same payload
to a running service instead. Exit codes: 0 success, 2 data error,
3 numerical failure, 4 config/usage error (including an unreachable server).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import httpx

from fieldbt import __version__
from fieldbt.commands import RunConfig, cmd_backtest, cmd_study, cmd_synth
from fieldbt.errors import ConfigError, DataError, NumericalError
from fieldbt.flatfile import parse_flat_file

EXIT_OK = 0
EXIT_DATA = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

_STATUS_TO_EXIT = {400: EXIT_CONFIG, 422: EXIT_DATA, 500: EXIT_NUMERICAL}


class _Parser(argparse.ArgumentParser):
    """Usage errors are config errors (exit 4), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser, with_strategies: bool) -> None:
    parser.add_argument("--config", help="flat key=value config file; flags override it")
    parser.add_argument("--prices", help="prices.csv path")
    parser.add_argument("--fundamentals", help="fundamentals.csv path")
    parser.add_argument("--benchmarks", help="benchmarks.csv path")
    parser.add_argument("--riskfree", help="riskfree.csv path")
    parser.add_argument("--synth-config", dest="synth_config", help="synthetic panel config file")
    parser.add_argument("--from", dest="date_from", help="range start (ISO date)")
    parser.add_argument("--to", dest="date_to", help="range end (ISO date)")
    parser.add_argument("--fields", help="comma-separated field identifiers")
    if with_strategies:
        parser.add_argument("--strategies", help="comma-separated strategy names")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="seed for synthetic data")
    parser.add_argument("--server", help="base URL of a running fieldbt service")


def build_parser() -> _Parser:
    parser = _Parser(prog="fieldbt", description="Explanatory-field studies and allocation backtests")
    parser.add_argument("--version", action="version", version=f"fieldbt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_synth = sub.add_parser("synth", help="generate a synthetic panel as CSV inputs")
    _add_common(p_synth, with_strategies=False)

    p_study = sub.add_parser("study", help="contemporary/lagged correlation study")
    _add_common(p_study, with_strategies=False)

    p_bt = sub.add_parser("backtest", help="monthly-rebalanced strategy backtest")
    _add_common(p_bt, with_strategies=True)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def _gather_config(args: argparse.Namespace) -> RunConfig:
    raw = {}
    if args.config:
        raw.update(parse_flat_file(args.config))
    overrides = {
        "prices": args.prices,
        "fundamentals": args.fundamentals,
        "benchmarks": args.benchmarks,
        "riskfree": args.riskfree,
        "synth_config": args.synth_config,
        "from": args.date_from,
        "to": args.date_to,
        "fields": args.fields,
        "out": args.out,
        "seed": args.seed,
    }
    if getattr(args, "strategies", None) is not None:
        overrides["strategies"] = args.strategies
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(raw)


def _request_payload(command: str, cfg: RunConfig) -> dict:
    payload = {"out": cfg.out, "seed": cfg.seed}
    if command != "synth":
        payload.update(
            {
                "prices": cfg.prices,
                "fundamentals": cfg.fundamentals,
                "benchmarks": cfg.benchmarks,
                "riskfree": cfg.riskfree,
                "date_from": cfg.date_from,
                "date_to": cfg.date_to,
                "fields": list(cfg.fields) if cfg.fields else None,
            }
        )
    if command == "backtest":
        payload["strategies"] = list(cfg.strategies)
    payload["synth_config"] = cfg.synth_config
    payload["synth_params"] = dict(cfg.synth_params) if cfg.synth_params else None
    return payload


def make_client(server: str) -> httpx.Client:
    return httpx.Client(base_url=server, timeout=600.0)


def _run_remote(command: str, cfg: RunConfig, server: str) -> int:
    try:
        with make_client(server) as client:
            resp = client.post(f"/v1/{command}", json=_request_payload(command, cfg))
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service at {server}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if resp.status_code == 200:
        print(json.dumps(resp.json(), sort_keys=True, indent=2))
        return EXIT_OK
    try:
        detail = resp.json()
    except ValueError:
        detail = {"detail": resp.text}
    print(f"error: {detail.get('error', resp.status_code)}: {detail.get('detail')}", file=sys.stderr)
    return _STATUS_TO_EXIT.get(resp.status_code, EXIT_DATA)


def _run_local(command: str, cfg: RunConfig) -> int:
    handler = {"synth": cmd_synth, "study": cmd_study, "backtest": cmd_backtest}[command]
    result = handler(cfg)
    print(json.dumps({"files": result.files, "summary": result.summary}, sort_keys=True, indent=2))
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from fieldbt.service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    try:
        cfg = _gather_config(args)
        if args.server:
            return _run_remote(args.command, cfg, args.server)
        return _run_local(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
