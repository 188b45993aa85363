#!/usr/bin/env python3
"""Quick full-grid run: 500 replications, 1000 evaluation points per cell.

Writes the strategy comparison and the SD/FD decompositions for all four
scenarios into --out-dir (default runs/desk). Takes on the order of an hour
on one core; use --workers to spread cells over processes.
"""
from __future__ import annotations

import argparse
import pathlib
import sys

from splitscore.cli import main as cli_main

N_REP = 500
N_EVAL = 1000


def run(out_dir: str, workers: int, seed: int, n_rep: int, n_eval: int) -> int:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    common = [
        "--nrep", str(n_rep),
        "--neval", str(n_eval),
        "--seed", str(seed),
        "--workers", str(workers),
    ]
    rc = cli_main(["run", *common, "--out", str(out / "scores.csv")])
    if rc not in (0, 3):
        return rc
    rc2 = cli_main([
        "decompose", *common,
        "--strategies", "FD,SD",
        "--out", str(out / "components.csv"),
    ])
    if rc2 != 0:
        return rc2
    print(f"wrote {out / 'scores.csv'} and {out / 'components.csv'}")
    return rc


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="runs/desk")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=1729)
    return ap.parse_args(argv)


if __name__ == "__main__":
    args = parse_args()
    sys.exit(run(args.out_dir, args.workers, args.seed, N_REP, N_EVAL))
