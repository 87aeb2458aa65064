"""Command line entry point: ``deepqr {run,plan,curves,verify}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import planner
from .errors import ConfigError
from .harness import emit_curves, emit_table, fit_methods, run_scenario, training_set
from .harness import load_config as _load_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parse_p(text: str) -> float:
    if text.lower() in ("inf", "infinity", "∞"):
        return math.inf
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"p must be a real >= 1 or 'inf', got {text!r}") from None
    if p < 1:
        raise argparse.ArgumentTypeError("p must be >= 1")
    return p


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="deepqr", description="Deep quantile regression laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every scenario in a config file and write table.csv")
    run.add_argument("--config", required=True)
    run.add_argument("--out-dir", default=".")
    run.add_argument("--seed", type=_u64, default=None, help="override every scenario's master seed")
    run.add_argument("--threads", type=int, default=1)

    pl = sub.add_parser("plan", help="print the NetworkPlan for a composite spec as JSON")
    pl.add_argument("--spec", required=True, help="path to a CompositeSpec JSON document")
    pl.add_argument("--n", type=int, required=True)
    pl.add_argument("--p", type=_parse_p, default=math.inf)
    pl.add_argument("--preset", required=True, choices=planner.PRESETS)

    cv = sub.add_parser("curves", help="fit replication 0 and write fitted quantile curves")
    cv.add_argument("--config", required=True)
    cv.add_argument("--grid", type=int, default=201)
    cv.add_argument("--out-dir", default=".")
    cv.add_argument("--seed", type=_u64, default=None)

    sub.add_parser("verify", help="run the training-free oracle and property checks")
    return ap


def load_config(path):
    try:
        return _load_config(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None


def _cmd_run(args) -> int:
    scenarios = load_config(args.config)
    if args.seed is not None:
        scenarios = [replace(s, master_seed=args.seed) for s in scenarios]
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = [run_scenario(s, threads=args.threads) for s in scenarios]
    emit_table(reports, out / "table.csv")
    print(out / "table.csv")
    return EXIT_OK


def _cmd_plan(args) -> int:
    try:
        spec = planner.CompositeSpec.from_json(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read spec: {exc}") from None
    print(planner.preset_plan(spec, args.n, args.p, args.preset).to_json(indent=2))
    return EXIT_OK


def _cmd_curves(args) -> int:
    scenarios = load_config(args.config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, sc in enumerate(scenarios):
        if args.seed is not None:
            sc = replace(sc, master_seed=args.seed)
        for method, preds in fit_methods(sc, 0, training_set(sc, 0)).items():
            path = out / f"curves_{i}_{sc.model}_{sc.error}_{method}.csv"
            emit_curves(sc, preds, args.grid, path)
            print(path)
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .selfcheck import run_all

    ok = True
    for name, passed, detail in run_all():
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_RUNTIME


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "plan": _cmd_plan, "curves": _cmd_curves, "verify": _cmd_verify}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
