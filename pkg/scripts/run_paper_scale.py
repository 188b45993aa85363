#!/usr/bin/env python3
"""Full-scale reproduction run: 4000 replications, 4000 evaluation points.

Identical layout to run_desk_scale.py but at the replication counts used
for the reported tables. Expect many core-hours; --workers is strongly
recommended.
"""
from __future__ import annotations

import argparse
import sys

from run_desk_scale import run

N_REP = 4000
N_EVAL = 4000


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="runs/paper")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=1729)
    args = ap.parse_args()
    sys.exit(run(args.out_dir, args.workers, args.seed, N_REP, N_EVAL))
