"""Factorial experiment runner, CSV emission, and the difference report.

Cells enumerate the four scenarios' full factor grids in a canonical order.
Each cell's random streams are keyed by a digest of its non-split-fraction
factors, so cells differing only in the training fraction share training and
evaluation data (FD, which ignores the split, is then bit-identical across
those cells) and output is byte-identical for a fixed seed regardless of
worker count.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decomp import DecompConfig, DecompositionEstimate, estimate_decomposition
from .randgen import (
    Purpose,
    Scenario,
    ScenarioParams,
    StreamKey,
    derive_seed,
    generate,
    make_stream,
)
from .strategy import (
    ALL_STRATEGIES,
    DEFAULT_OPTIONS,
    Strategy,
    StrategyOptions,
    evaluate,
    run_replication,
    split_data,
)

DEFAULT_SEED = 1729

# named replication profiles: quick checks vs full reproduction
DESK_SCALE = {"n_rep": 500, "n_eval": 1000}
PAPER_SCALE = {"n_rep": 4000, "n_eval": 4000}

FRACTION_LEVELS = (("1/3", 1.0 / 3.0), ("1/2", 1.0 / 2.0), ("2/3", 2.0 / 3.0))

FACTOR_COLUMNS = ("lam", "n", "sigma", "beta", "p", "rho", "d", "f")

RESULT_COLUMNS = (
    "scenario",
    "cell_id",
    *FACTOR_COLUMNS,
    "strategy",
    "n_rep",
    "n_eval",
    "mean_score",
    "se",
    "n_capped",
    "n_fallback",
    "n_degenerate_start",
    "n_separation",
    "n_sigma_floor",
    "unreliable",
    "diff_fd_mean",
    "diff_fd_se",
)

DECOMP_COLUMNS = (
    "scenario",
    "cell_id",
    *FACTOR_COLUMNS,
    "strategy",
    "n_rep",
    "n_eval",
    "n_inf",
    "mean_score",
    "best_score",
    "selection_cost",
    "estimation_cost",
    "reuse_cost",
    "selection_matched",
    "estimation_matched",
    "reuse_matched",
    "best_se",
    "selection_se",
    "estimation_se",
    "reuse_se",
    "telescope_gap",
    "n_forms",
    "best_form",
    "prob_best_form",
    "n_fallback",
    "n_capped",
    "n_capped_aux",
    "flags",
)

# replication-level failures that abandon the selected model
_FATAL_FLAGS = ("fallback-intercept", "degenerate-start")
_FATAL_RATE = 0.5


@dataclass(frozen=True)
class ScenarioCell:
    """One factor combination of one scenario."""

    params: ScenarioParams
    fraction: float
    fraction_label: str
    cell_id: str
    factor_key: str  # canonical non-fraction factor string (stream identity)
    factors: tuple[tuple[str, str], ...]  # column -> value strings for CSV


def _mk_cell(scenario: Scenario, params: ScenarioParams, frac_label: str,
             frac: float, items: list[tuple[str, str]]) -> ScenarioCell:
    factor_key = ",".join(f"{k}={v}" for k, v in items)
    cell_id = f"{scenario.value}:{factor_key},f={frac_label}"
    return ScenarioCell(
        params=params,
        fraction=frac,
        fraction_label=frac_label,
        cell_id=cell_id,
        factor_key=factor_key,
        factors=tuple(items + [("f", frac_label)]),
    )


def enumerate_cells(scenario: Scenario) -> tuple[ScenarioCell, ...]:
    """Full factorial grid of one scenario, in canonical order."""
    cells: list[ScenarioCell] = []
    if scenario is Scenario.BOXCOX:
        for sigma in (0.1, 1.0, 10.0):
            for beta in (0.0, 1.0):
                for n in (18, 48):
                    for lam in (-0.5, 0.0, 0.5):
                        for frac_label, frac in FRACTION_LEVELS:
                            params = ScenarioParams(
                                scenario=scenario, n=n, beta=beta,
                                sigma=sigma, lam=lam,
                            )
                            items = [
                                ("sigma", f"{sigma:g}"),
                                ("beta", f"{beta:g}"),
                                ("n", str(n)),
                                ("lam", f"{lam:g}"),
                            ]
                            cells.append(_mk_cell(scenario, params, frac_label, frac, items))
    elif scenario is Scenario.VARSEL:
        for sigma in (1.0, 5.0):
            for beta in (0.0, 1.0):
                for p in (5, 15):
                    for rho in (0.0, 0.95):
                        for frac_label, frac in FRACTION_LEVELS:
                            params = ScenarioParams(
                                scenario=scenario, n=60, beta=beta,
                                sigma=sigma, p=p, rho=rho,
                            )
                            items = [
                                ("sigma", f"{sigma:g}"),
                                ("beta", f"{beta:g}"),
                                ("p", str(p)),
                                ("rho", f"{rho:g}"),
                                ("n", "60"),
                            ]
                            cells.append(_mk_cell(scenario, params, frac_label, frac, items))
    elif scenario is Scenario.OUTLIER:
        for n in (18, 48):
            for sigma in (1.0, 5.0):
                for beta in (0.0, 1.0):
                    for d in (3.0, math.inf):
                        for frac_label, frac in FRACTION_LEVELS:
                            params = ScenarioParams(
                                scenario=scenario, n=n, beta=beta,
                                sigma=sigma, df=d,
                            )
                            items = [
                                ("n", str(n)),
                                ("sigma", f"{sigma:g}"),
                                ("beta", f"{beta:g}"),
                                ("d", "inf" if math.isinf(d) else f"{d:g}"),
                            ]
                            cells.append(_mk_cell(scenario, params, frac_label, frac, items))
    elif scenario is Scenario.BINARY:
        for p in (1, 3, 5):
            for n in (18, 48):
                for sigma in (0.1, 1.0):
                    for beta in (0.0, 1.0):
                        for frac_label, frac in FRACTION_LEVELS:
                            params = ScenarioParams(
                                scenario=scenario, n=n, beta=beta,
                                sigma=sigma, p=p,
                            )
                            items = [
                                ("p", str(p)),
                                ("n", str(n)),
                                ("sigma", f"{sigma:g}"),
                                ("beta", f"{beta:g}"),
                            ]
                            cells.append(_mk_cell(scenario, params, frac_label, frac, items))
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return tuple(cells)


def cell_seed(cell: ScenarioCell, master_seed: int) -> int:
    """Stream seed from the non-fraction factors only (FD split-invariance)."""
    return derive_seed(master_seed, cell.params.scenario.value, cell.factor_key)


@dataclass(frozen=True)
class RunConfig:
    """One invocation's worth of settings."""

    n_rep: int = PAPER_SCALE["n_rep"]
    n_eval: int = PAPER_SCALE["n_eval"]
    n_inf: int = 10000
    master_seed: int = DEFAULT_SEED
    workers: int = 1
    scenarios: tuple[Scenario, ...] = tuple(Scenario)
    cell_filter: str | None = None  # substring of cell_id
    strategies: tuple[Strategy, ...] = ALL_STRATEGIES
    options: StrategyOptions = DEFAULT_OPTIONS

    def __post_init__(self) -> None:
        if self.n_rep < 1 or self.n_eval < 1:
            raise ValueError("n_rep and n_eval must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class ResultRow:
    """One (cell, strategy) aggregate."""

    scenario: str
    cell_id: str
    factors: dict
    strategy: str
    n_rep: int
    n_eval: int
    mean_score: float
    se: float
    n_capped: int
    n_fallback: int
    n_degenerate_start: int
    n_separation: int
    n_sigma_floor: int
    unreliable: bool
    diff_fd_mean: float | None
    diff_fd_se: float | None

    def as_record(self) -> dict:
        rec = {c: "" for c in RESULT_COLUMNS}
        rec.update(
            scenario=self.scenario,
            cell_id=self.cell_id,
            strategy=self.strategy,
            n_rep=str(self.n_rep),
            n_eval=str(self.n_eval),
            mean_score=_fmt(self.mean_score),
            se=_fmt(self.se),
            n_capped=str(self.n_capped),
            n_fallback=str(self.n_fallback),
            n_degenerate_start=str(self.n_degenerate_start),
            n_separation=str(self.n_separation),
            n_sigma_floor=str(self.n_sigma_floor),
            unreliable=str(self.unreliable).lower(),
            diff_fd_mean=_fmt(self.diff_fd_mean),
            diff_fd_se=_fmt(self.diff_fd_se),
        )
        rec.update(self.factors)
        return rec


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def cell_strategies(cell: ScenarioCell, strategies) -> tuple[Strategy, ...]:
    """Drop VALID for the binary scenario; keep canonical order."""
    out = tuple(s for s in ALL_STRATEGIES if s in strategies)
    if cell.params.scenario is Scenario.BINARY:
        out = tuple(s for s in out if s is not Strategy.VALID)
    return out


def run_cell(cell: ScenarioCell, config: RunConfig) -> list[ResultRow]:
    """Paired replications of every requested strategy on one cell."""
    strategies = cell_strategies(cell, config.strategies)
    if not strategies:
        return []
    seed = cell_seed(cell, config.master_seed)
    params = cell.params
    n_rep = config.n_rep
    scores = {s: np.zeros(n_rep) for s in strategies}
    counts = {s: {"n_capped": 0, "fallback-intercept": 0, "degenerate-start": 0,
                  "separation": 0, "sigma-floor": 0} for s in strategies}
    for j in range(n_rep):
        train = generate(params, make_stream(StreamKey(seed, j, Purpose.TRAIN_DATA)))
        ev = generate(
            params,
            make_stream(StreamKey(seed, j, Purpose.EVAL_DATA)),
            n_override=config.n_eval,
        )
        plan = split_data(
            params.n,
            cell.fraction,
            make_stream(StreamKey(seed, j, Purpose.SPLIT_PERMUTATION)),
        )
        models = run_replication(params, train, plan, strategies, config.options)
        for s in strategies:
            res = evaluate(models[s], ev, config.options, replication_id=j)
            scores[s][j] = res.mean_score
            counts[s]["n_capped"] += res.n_capped
            for f in res.flags:
                if f in counts[s]:
                    counts[s][f] += 1

    unreliable = any(
        sum(counts[s][f] for f in _FATAL_FLAGS) > _FATAL_RATE * n_rep
        for s in strategies
    )
    rows: list[ResultRow] = []
    fd = scores.get(Strategy.FD)
    for s in strategies:
        v = scores[s]
        diff_mean = diff_se = None
        if fd is not None and s is not Strategy.FD:
            dvec = fd - v
            diff_mean = float(dvec.mean())
            diff_se = float(dvec.std(ddof=1) / math.sqrt(n_rep))
        rows.append(
            ResultRow(
                scenario=params.scenario.value,
                cell_id=cell.cell_id,
                factors=dict(cell.factors),
                strategy=s.value,
                n_rep=n_rep,
                n_eval=config.n_eval,
                mean_score=float(v.mean()),
                se=float(v.std(ddof=1) / math.sqrt(n_rep)),
                n_capped=counts[s]["n_capped"],
                n_fallback=counts[s]["fallback-intercept"],
                n_degenerate_start=counts[s]["degenerate-start"],
                n_separation=counts[s]["separation"],
                n_sigma_floor=counts[s]["sigma-floor"],
                unreliable=unreliable,
                diff_fd_mean=diff_mean,
                diff_fd_se=diff_se,
            )
        )
    return rows


def decompose_cell(
    cell: ScenarioCell, config: RunConfig, strategy: Strategy
) -> DecompositionEstimate:
    """Four-component decomposition for one cell and strategy."""
    dc = DecompConfig(
        n_rep=config.n_rep,
        n_eval=config.n_eval,
        n_inf=config.n_inf,
        options=config.options,
    )
    return estimate_decomposition(
        cell.params,
        cell.fraction,
        cell_seed(cell, config.master_seed),
        strategy,
        dc,
    )


def decomp_record(cell: ScenarioCell, est: DecompositionEstimate) -> dict:
    rec = {c: "" for c in DECOMP_COLUMNS}
    rec.update(
        scenario=est.scenario.value,
        cell_id=cell.cell_id,
        strategy=est.strategy.value,
        n_rep=str(est.n_rep),
        n_eval=str(est.n_eval),
        n_inf=str(est.n_inf),
        mean_score=_fmt(est.mean_observed),
        best_score=_fmt(est.best_score),
        selection_cost=_fmt(est.selection_cost),
        estimation_cost=_fmt(est.estimation_cost),
        reuse_cost=_fmt(est.reuse_cost),
        selection_matched=_fmt(est.selection_matched),
        estimation_matched=_fmt(est.estimation_matched),
        reuse_matched=_fmt(est.reuse_matched),
        best_se=_fmt(est.best_se),
        selection_se=_fmt(est.selection_se),
        estimation_se=_fmt(est.estimation_se),
        reuse_se=_fmt(est.reuse_se),
        telescope_gap=_fmt(est.telescope_gap()),
        n_forms=str(est.n_forms),
        best_form=est.best_form,
        prob_best_form=_fmt(est.prob_best_form),
        n_fallback=str(est.n_fallback_fits),
        n_capped=str(est.n_capped),
        n_capped_aux=str(est.n_capped_aux),
        flags="|".join(est.flags),
    )
    rec.update(dict(cell.factors))
    return rec


def select_cells(config: RunConfig) -> list[ScenarioCell]:
    cells: list[ScenarioCell] = []
    for scen in config.scenarios:
        cells.extend(enumerate_cells(scen))
    if config.cell_filter:
        cells = [c for c in cells if config.cell_filter in c.cell_id]
    return cells


def _run_cell_task(args):
    cell, config = args
    return run_cell(cell, config)


def _decomp_task(args):
    cell, config, strategy = args
    return decompose_cell(cell, config, strategy)


def run_experiment(config: RunConfig) -> tuple[list[ResultRow], int]:
    """All requested cells; returns (rows, number of unreliable cells)."""
    cells = select_cells(config)
    tasks = [(c, config) for c in cells]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            per_cell = list(pool.map(_run_cell_task, tasks, chunksize=1))
    else:
        per_cell = [_run_cell_task(t) for t in tasks]
    rows = [r for cell_rows in per_cell for r in cell_rows]
    n_unreliable = sum(1 for cell_rows in per_cell if cell_rows and cell_rows[0].unreliable)
    return rows, n_unreliable


def run_decomposition(
    config: RunConfig, strategies: tuple[Strategy, ...]
) -> list[dict]:
    """Decomposition rows for every requested (cell, strategy).

    FD ignores the split, so FD estimates for cells identical up to the
    fraction are computed once and reused.
    """
    cells = select_cells(config)
    tasks: list[tuple[ScenarioCell, Strategy]] = []
    for cell in cells:
        for s in cell_strategies(cell, strategies):
            tasks.append((cell, s))
    keys = []
    for cell, s in tasks:
        if s is Strategy.FD:
            key = ("fd", cell.params.scenario.value, cell.factor_key)
        else:
            key = ("cell", cell.cell_id, s.value)
        keys.append(key)
    unique: dict = {}
    for (cell, s), key in zip(tasks, keys):
        if key not in unique:
            unique[key] = (cell, config, s)
    unique_keys = list(unique)
    if config.workers > 1 and len(unique_keys) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_decomp_task, [unique[k] for k in unique_keys], chunksize=1))
    else:
        results = [_decomp_task(unique[k]) for k in unique_keys]
    by_key = dict(zip(unique_keys, results))
    return [decomp_record(cell, by_key[key]) for (cell, _s), key in zip(tasks, keys)]


def write_csv(records: list[dict], columns, path_or_file) -> None:
    """Write records with a fixed column order; deterministic bytes."""
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for rec in records:
            w.writerow({c: rec.get(c, "") for c in columns})
    finally:
        if own:
            fh.close()


def rows_to_records(rows: list[ResultRow]) -> list[dict]:
    return [r.as_record() for r in rows]


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def report_differences(records: list[dict]):
    """Per-cell FD-minus-strategy differences from a run CSV.

    Returns (columns, table, notices). Differences and their standard errors
    come from the paired per-replication columns written at run time.
    """
    by_cell: dict[str, dict[str, dict]] = {}
    order: list[str] = []
    for rec in records:
        cid = rec["cell_id"]
        if cid not in by_cell:
            by_cell[cid] = {}
            order.append(cid)
        by_cell[cid][rec["strategy"]] = rec
    present = set()
    for cid in order:
        present.update(by_cell[cid])
    notices = []
    if "FD" not in present:
        raise ValueError("report needs FD rows")
    others = [s.value for s in (Strategy.SD, Strategy.SAFE, Strategy.VALID) if s.value in present]
    for s in (Strategy.SD, Strategy.SAFE, Strategy.VALID):
        if s.value not in present:
            notices.append(f"strategy {s.value} absent; FD-{s.value} column omitted")
    columns = ["scenario", "cell_id"]
    for s in others:
        columns += [f"fd_minus_{s.lower()}", f"fd_minus_{s.lower()}_se"]
    table = []
    for cid in order:
        cell = by_cell[cid]
        fd = cell.get("FD")
        if fd is None:
            notices.append(f"cell {cid} lacks FD; skipped")
            continue
        row = {"scenario": fd["scenario"], "cell_id": cid}
        for s in others:
            other = cell.get(s)
            if other is None or other.get("diff_fd_mean", "") == "":
                row[f"fd_minus_{s.lower()}"] = ""
                row[f"fd_minus_{s.lower()}_se"] = ""
            else:
                row[f"fd_minus_{s.lower()}"] = other["diff_fd_mean"]
                row[f"fd_minus_{s.lower()}_se"] = other["diff_fd_se"]
        table.append(row)
    return columns, table, notices
