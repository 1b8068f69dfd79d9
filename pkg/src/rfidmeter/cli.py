"""Command line entry points: serve, run, topup, fit-table1, report."""

from __future__ import annotations

import argparse
import os
import sys

from .money import Money
from .sim import (
    ScenarioInvalid,
    builtin_scenario,
    export_trace_csv,
    export_trace_jsonl,
    fit_tariff,
    load_scenario,
    run_scenario,
    table1_scenario,
    TABLE1_CREDIT,
    TABLE1_OBSERVATIONS,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfidmeter", description="prepaid meter simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP gateway")
    serve.add_argument("--port", type=int, default=None, help="listen port (overrides env and config)")
    serve.add_argument("--config", default=None, help="gateway config file (YAML)")
    serve.add_argument("--data-dir", default=None, help="directory for cards/sms/events stores")
    serve.add_argument("--pace", choices=["wall", "afap"], default=None)
    serve.add_argument("--multiplier", type=float, default=None, help="simulated seconds per wall second")

    run = sub.add_parser("run", help="run one scenario to CSV + JSONL")
    run.add_argument("--scenario", required=True, help="builtin name (e.g. table1-bulb1) or YAML path")
    run.add_argument("--out", required=True, help="CSV output path; a .jsonl sibling is written too")
    run.add_argument("--fit-table1", action="store_true", help="also print the fitted tariff")

    topup = sub.add_parser("topup", help="write a credit balance onto a stored card")
    topup.add_argument("--store", required=True, help="card store JSONL path")
    topup.add_argument("--card", required=True, help="card uid (16 hex chars)")
    topup.add_argument("--amount", required=True, help="new balance in RM, e.g. 5 or 5.00")

    sub.add_parser("fit-table1", help="print the tariff fitted to the cutoff observations")

    report = sub.add_parser("report", help="render scenario traces to PNG figures")
    report.add_argument(
        "--scenario",
        action="append",
        default=None,
        help="builtin name or YAML path; repeatable; default: all three builtin runs",
    )
    report.add_argument("--out-dir", required=True, help="directory for CSV and PNG output")
    return parser


def _resolve_scenario(ref: str):
    scenario = builtin_scenario(ref)
    if scenario is not None:
        return scenario
    if not os.path.exists(ref):
        raise ScenarioInvalid("scenario", f"file not found: {ref}")
    return load_scenario(ref)


def _print_fit() -> None:
    fit = fit_tariff(TABLE1_OBSERVATIONS, TABLE1_CREDIT)
    print(f"base_rm_per_second: {fit.base_rm_per_second!r}")
    print(f"rate_rm_per_watt_second: {fit.rate_rm_per_watt_second!r}")
    residuals = ", ".join(f"{r:+.4f}" for r in fit.residuals_seconds)
    print(f"residuals_seconds: [{residuals}]")


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import GatewayConfig, create_app, load_gateway_config, resolve_port

    try:
        config = load_gateway_config(args.config) if args.config else GatewayConfig()
        if args.data_dir is not None:
            config.data_dir = args.data_dir
        if args.pace is not None:
            config.pace = args.pace
        if args.multiplier is not None:
            config.multiplier = args.multiplier
        port = resolve_port(args.port, config.port)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    app = create_app(config)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="info")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = _resolve_scenario(args.scenario)
    except (ScenarioInvalid, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        trace = run_scenario(scenario)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    jsonl_path = os.path.splitext(args.out)[0] + ".jsonl"
    with open(args.out, "w") as fh:
        fh.write(export_trace_csv(trace))
    with open(jsonl_path, "w") as fh:
        fh.write(export_trace_jsonl(trace))
    print(f"wrote {args.out} and {jsonl_path}")
    if args.fit_table1:
        _print_fit()
    return EXIT_OK


def _cmd_topup(args: argparse.Namespace) -> int:
    from .station import SerialChannel, StationState, StationError
    from .store import CardStore, StoreError

    try:
        amount = Money.from_rm(args.amount)
        if not amount.is_whole_sen:
            raise ValueError(f"amount {args.amount} is not a whole number of sen")
        store = CardStore.load(args.store)
        card = store.get(args.card)
        station = StationState(SerialChannel())
        station.dock_card(card)
        station.station_write_credit(amount)
        written = station.undock_card()
        store.put(written)
    except (ValueError, StoreError, StationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"card {written.uid_hex}: credit RM{written.credit.rm_2dp()}, writes {written.write_count}")
    return EXIT_OK


def _cmd_fit_table1(_args: argparse.Namespace) -> int:
    _print_fit()
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    from .report import render_report

    refs = args.scenario or [s.name for s in table1_scenario()]
    try:
        scenarios = [_resolve_scenario(ref) for ref in refs]
    except (ScenarioInvalid, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        traces = {scenario.name: run_scenario(scenario) for scenario in scenarios}
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    os.makedirs(args.out_dir, exist_ok=True)
    for name, trace in traces.items():
        with open(os.path.join(args.out_dir, f"{name}.csv"), "w") as fh:
            fh.write(export_trace_csv(trace))
    written = render_report(traces, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "serve": _cmd_serve,
        "run": _cmd_run,
        "topup": _cmd_topup,
        "fit-table1": _cmd_fit_table1,
        "report": _cmd_report,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
