"""Command-line entry points: run, decompose, report, list-cells."""
from __future__ import annotations

import argparse
import os
import sys

from .harness import (
    DECOMP_COLUMNS,
    DEFAULT_SEED,
    RESULT_COLUMNS,
    PAPER_SCALE,
    RunConfig,
    enumerate_cells,
    read_csv,
    report_differences,
    rows_to_records,
    run_decomposition,
    run_experiment,
    select_cells,
    write_csv,
)
from .randgen import Scenario
from .strategy import ALL_STRATEGIES, Strategy, StrategyOptions

_ENV_WORKERS = "SPLITSCORE_WORKERS"


def _parse_scenarios(text: str) -> tuple[Scenario, ...]:
    if text == "all":
        return tuple(Scenario)
    out = []
    for part in text.split(","):
        part = part.strip()
        try:
            out.append(Scenario(part))
        except ValueError:
            raise ValueError(
                f"unknown scenario {part!r}; choose from "
                + ", ".join(s.value for s in Scenario)
            ) from None
    return tuple(out)


def _parse_strategies(text: str) -> tuple[Strategy, ...]:
    out = []
    for part in text.split(","):
        part = part.strip().upper()
        try:
            out.append(Strategy(part))
        except ValueError:
            raise ValueError(
                f"unknown strategy {part!r}; choose from "
                + ", ".join(s.value for s in ALL_STRATEGIES)
            ) from None
    return tuple(out)


def _default_workers() -> int:
    env = os.environ.get(_ENV_WORKERS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{_ENV_WORKERS} must be an integer") from None
    return 1


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="all",
                   help="scenario name or comma list (default: all)")
    p.add_argument("--cell", default=None,
                   help="only cells whose id contains this substring")
    p.add_argument("--nrep", type=int, default=PAPER_SCALE["n_rep"])
    p.add_argument("--neval", type=int, default=PAPER_SCALE["n_eval"])
    p.add_argument("--ninf", type=int, default=10000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default: ${_ENV_WORKERS} or 1)")
    p.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    p.add_argument("--strategies", default="FD,SD,SAFE,VALID")
    p.add_argument("--no-jacobian", action="store_true",
                   help="score the transform scenario on the transformed scale")
    p.add_argument("--stepwise-start", choices=("full", "null"), default="full")
    p.add_argument("--outlier-transfer", choices=("none", "rule"), default="none")


def _config_from(args) -> RunConfig:
    return RunConfig(
        n_rep=args.nrep,
        n_eval=args.neval,
        n_inf=args.ninf,
        master_seed=args.seed,
        workers=args.workers if args.workers is not None else _default_workers(),
        scenarios=_parse_scenarios(args.scenario),
        cell_filter=args.cell,
        strategies=_parse_strategies(args.strategies),
        options=StrategyOptions(
            jacobian=not args.no_jacobian,
            stepwise_start=args.stepwise_start,
            outlier_transfer=args.outlier_transfer,
        ),
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="splitscore",
        description="Data-splitting prediction strategy simulations under the log score.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run strategy comparisons over factor grids")
    _add_run_flags(run)
    dec = sub.add_parser("decompose", help="estimate the four score components")
    _add_run_flags(dec)
    rep = sub.add_parser("report", help="print FD-minus-strategy differences")
    rep.add_argument("--in", dest="infile", required=True, help="run CSV to read")
    lst = sub.add_parser("list-cells", help="print cell ids")
    lst.add_argument("--scenario", default="all")
    return p


def _write_records(records, columns, out_path) -> None:
    if out_path:
        write_csv(records, columns, out_path)
    else:
        write_csv(records, columns, sys.stdout)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _config_from(args)
            rows, n_unreliable = run_experiment(config)
            _write_records(rows_to_records(rows), RESULT_COLUMNS, args.out)
            if n_unreliable:
                print(f"warning: {n_unreliable} unreliable cell(s)", file=sys.stderr)
                return 3
            return 0
        if args.command == "decompose":
            config = _config_from(args)
            records = run_decomposition(config, config.strategies)
            _write_records(records, DECOMP_COLUMNS, args.out)
            return 0
        if args.command == "report":
            records = read_csv(args.infile)
            columns, table, notices = report_differences(records)
            for note in notices:
                print(f"note: {note}", file=sys.stderr)
            write_csv(table, columns, sys.stdout)
            return 0
        if args.command == "list-cells":
            for scen in _parse_scenarios(args.scenario):
                for cell in enumerate_cells(scen):
                    print(cell.cell_id)
            return 0
        parser.error(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
