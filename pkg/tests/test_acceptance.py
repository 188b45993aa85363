"""Acceptance checks at desk scale: one test per numbered criterion.

Every test runs at n_rep=500, n_eval=1000 with the default master seed, so
a full pass takes roughly an hour on one core; the component decompositions
of all 276 cells dominate. Run with -k to pick out single criteria.
"""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from splitscore.glm import logit_fit
from splitscore.linmod import (
    PredictionKind,
    PredictiveDistribution,
    ols_fit,
)
from splitscore.randgen import (
    ResponseKind,
    Scenario,
    correlated_uniform_design,
)
from splitscore.scoring import log_score, t_neg_log_density
from splitscore.selection import Family, outlier_prune, stepwise_aic
from splitscore.strategy import Strategy
from splitscore.harness import (
    DEFAULT_SEED,
    DESK_SCALE,
    RESULT_COLUMNS,
    RunConfig,
    decompose_cell,
    enumerate_cells,
    run_experiment,
    rows_to_records,
    write_csv,
)

from conftest import make_dataset

N_REP = DESK_SCALE["n_rep"]
N_EVAL = DESK_SCALE["n_eval"]
N_INF = 10_000


def _desk_config(**kwargs) -> RunConfig:
    base = dict(
        n_rep=N_REP, n_eval=N_EVAL, n_inf=N_INF, master_seed=DEFAULT_SEED
    )
    base.update(kwargs)
    return RunConfig(**base)


def _by_cell_strategy(rows):
    return {(r.cell_id, r.strategy): r for r in rows}


# ---------------------------------------------------------------------------
# shared expensive computations


@pytest.fixture(scope="module")
def boxcox_rows():
    rows, _ = run_experiment(_desk_config(scenarios=(Scenario.BOXCOX,)))
    return rows


@pytest.fixture(scope="module")
def outlier_rows():
    rows, _ = run_experiment(_desk_config(scenarios=(Scenario.OUTLIER,)))
    return rows


@pytest.fixture(scope="module")
def binary_rows():
    rows, _ = run_experiment(_desk_config(scenarios=(Scenario.BINARY,)))
    return rows


@pytest.fixture(scope="module")
def sd_decomps():
    """Component decomposition of SD for every cell of every scenario."""
    cfg = _desk_config()
    out = {}
    for scenario in Scenario:
        for cell in enumerate_cells(scenario):
            out[cell.cell_id] = decompose_cell(cell, cfg, Strategy.SD)
    return out


def _fd_decomps_by_factor(scenario):
    """FD ignores the split, so one estimate serves all three fractions."""
    cfg = _desk_config()
    unique = {}
    expanded = {}
    for cell in enumerate_cells(scenario):
        if cell.factor_key not in unique:
            unique[cell.factor_key] = decompose_cell(cell, cfg, Strategy.FD)
        expanded[cell.cell_id] = unique[cell.factor_key]
    return expanded


@pytest.fixture(scope="module")
def fd_varsel_decomps():
    return _fd_decomps_by_factor(Scenario.VARSEL)


@pytest.fixture(scope="module")
def fd_outlier_decomps():
    return _fd_decomps_by_factor(Scenario.OUTLIER)


# ---------------------------------------------------------------------------
# criteria


def test_criterion_01_unit_exactness():
    normal = PredictiveDistribution(kind=PredictionKind.T, loc=0.0, scale=1.0)
    assert log_score(normal, 0.0) == pytest.approx(
        0.5 * math.log(2.0 * math.pi), abs=1e-12
    )
    coin = PredictiveDistribution(kind=PredictionKind.BERNOULLI, prob=0.5)
    assert log_score(coin, 1.0) == pytest.approx(math.log(2.0), abs=1e-12)
    cauchy = PredictiveDistribution(
        kind=PredictionKind.T, loc=0.0, scale=1.0, df=1.0
    )
    assert log_score(cauchy, 0.0) == pytest.approx(math.log(math.pi), abs=1e-12)

    fit = ols_fit(make_dataset([[0.0], [1.0], [2.0]], [0.0, 1.0, 1.0]), (0,))
    assert fit.coefficients[0] == pytest.approx(1.0 / 6.0, abs=1e-10)
    assert fit.coefficients[1] == pytest.approx(0.5, abs=1e-10)
    assert fit.sigma2_hat == pytest.approx(1.0 / 6.0, abs=1e-10)


def test_criterion_02_telescoping_identity(
    sd_decomps, fd_varsel_decomps, fd_outlier_decomps
):
    worst = 0.0
    for est in (
        list(sd_decomps.values())
        + list(fd_varsel_decomps.values())
        + list(fd_outlier_decomps.values())
    ):
        rel = abs(est.telescope_gap_matched()) / max(1.0, abs(est.mean_observed))
        worst = max(worst, rel)
    assert worst <= 1e-10, f"worst relative telescoping gap {worst:.3e}"


def test_criterion_03_sd_reuse_is_noise(sd_decomps):
    n_pass = sum(
        1
        for est in sd_decomps.values()
        if abs(est.reuse_matched) < 3.0 * est.reuse_se
    )
    total = len(sd_decomps)
    assert total == 276
    frac = n_pass / total
    assert frac >= 0.99, f"SD reuse within 3 standard errors in {n_pass}/{total} cells"


def test_criterion_04_transform_scenario_orderings(boxcox_rows):
    by = _by_cell_strategy(boxcox_rows)
    cells = sorted({cid for cid, _ in by})
    assert len(cells) == 108
    fd_below_sd = sum(
        1 for c in cells if by[(c, "FD")].mean_score < by[(c, "SD")].mean_score
    )
    safe_below_sd = sum(
        1 for c in cells if by[(c, "SAFE")].mean_score < by[(c, "SD")].mean_score
    )
    big_n = [c for c in cells if ",n=48," in c]
    assert len(big_n) == 54
    small_gap = sum(
        1
        for c in big_n
        if abs(by[(c, "FD")].mean_score - by[(c, "SD")].mean_score) < 0.15
    )
    assert fd_below_sd >= 0.95 * 108, f"FD below SD in {fd_below_sd}/108 cells"
    assert safe_below_sd >= 0.95 * 108, (
        f"SAFE below SD in {safe_below_sd}/108 cells"
    )
    assert small_gap >= 0.90 * 54, (
        f"|FD-SD| < 0.15 in {small_gap}/54 cells at n=48"
    )


def test_criterion_05_outlier_scenario_orderings(outlier_rows):
    by = _by_cell_strategy(outlier_rows)
    cells = sorted({cid for cid, _ in by})
    heavy = [c for c in cells if ",d=3," in c and c.startswith("outlier:n=48")]
    light = [c for c in cells if ",d=inf," in c]
    assert len(heavy) == 12 and len(light) == 24
    sd_better_heavy = sum(
        1 for c in heavy if by[(c, "SD")].mean_score < by[(c, "FD")].mean_score
    )
    fd_better_light = sum(
        1 for c in light if by[(c, "FD")].mean_score < by[(c, "SD")].mean_score
    )
    assert fd_better_light >= 0.75 * len(light), (
        f"FD below SD in {fd_better_light}/{len(light)} normal-tail cells"
    )
    assert sd_better_heavy >= 0.75 * len(heavy), (
        f"SD below FD in {sd_better_heavy}/{len(heavy)} heavy-tail n=48 cells"
    )


def test_criterion_06_outlier_reuse_dominates_estimation(fd_outlier_decomps):
    assert len(fd_outlier_decomps) == 48
    n_dominant = sum(
        1
        for est in fd_outlier_decomps.values()
        if est.reuse_cost > est.estimation_cost
    )
    assert n_dominant >= 0.60 * 48, (
        f"FD reuse cost exceeds estimation cost in {n_dominant}/48 cells"
    )


def test_criterion_07_binary_scenario_orderings(binary_rows):
    by = _by_cell_strategy(binary_rows)
    cells = sorted({cid for cid, _ in by})
    single = [c for c in cells if c.startswith("binary:p=1,")]
    multi = [
        c
        for c in cells
        if (c.startswith("binary:p=3,") or c.startswith("binary:p=5,"))
        and ",n=48," in c
        and ",beta=1," in c
    ]
    assert len(single) == 24 and len(multi) == 12
    fd_better_single = sum(
        1 for c in single if by[(c, "FD")].mean_score < by[(c, "SD")].mean_score
    )
    sd_better_multi = sum(
        1 for c in multi if by[(c, "SD")].mean_score < by[(c, "FD")].mean_score
    )
    assert fd_better_single >= 0.75 * len(single), (
        f"FD below SD in {fd_better_single}/{len(single)} single-predictor cells"
    )
    assert sd_better_multi >= 0.60 * len(multi), (
        f"SD below FD in {sd_better_multi}/{len(multi)} "
        "multi-predictor signal cells at n=48"
    )


def test_criterion_08_varsel_reuse_share(fd_varsel_decomps):
    assert len(fd_varsel_decomps) == 48
    n_big_share = 0
    for est in fd_varsel_decomps.values():
        total = est.selection_cost + est.estimation_cost + est.reuse_cost
        if total != 0.0 and est.reuse_cost / total > 0.10:
            n_big_share += 1
    assert n_big_share >= 24, (
        f"FD reuse share above 10% in {n_big_share}/48 cells"
    )


def test_criterion_09_worker_count_determinism(tmp_path):
    base = dict(
        n_rep=20,
        n_eval=40,
        master_seed=DEFAULT_SEED,
        cell_filter="sigma=1,beta=1",
    )
    paths = []
    for workers in (1, 2):
        rows, _ = run_experiment(RunConfig(workers=workers, **base))
        path = tmp_path / f"workers{workers}.csv"
        write_csv(rows_to_records(rows), RESULT_COLUMNS, path)
        paths.append(path)
    b1, b2 = paths[0].read_bytes(), paths[1].read_bytes()
    assert len(b1) > 1000
    assert b1 == b2


def test_criterion_10_property_suites():
    failures = []

    # OLS orthogonality: residuals are orthogonal to the fitted columns
    for case in range(200):
        rng = np.random.default_rng(910_000 + case)
        n = int(rng.integers(8, 21))
        p = int(rng.integers(1, 6))
        x = rng.normal(size=(n, p))
        y = x @ rng.normal(size=p) + rng.normal(size=n)
        fit = ols_fit(make_dataset(x, y), tuple(range(p)))
        x1 = fit.model_matrix(x)
        resid = y - fit.predict_mean(x)
        if np.abs(x1.T @ resid).max() >= 1e-8:
            failures.append(f"ols-orthogonality case {case}")

    # IRLS score equation: X'(y - p) vanishes at the fitted coefficients
    checked = 0
    case = 0
    while checked < 200:
        rng = np.random.default_rng(920_000 + case)
        case += 1
        n = int(rng.integers(12, 21))
        p = int(rng.integers(1, 4))
        x = rng.normal(size=(n, p))
        eta = x @ rng.normal(scale=0.7, size=p)
        y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        if y.min() == y.max():
            continue
        data = make_dataset(x, y, response_kind=ResponseKind.BINARY)
        fit = logit_fit(data, tuple(range(p)))
        if not fit.converged:
            continue
        x1 = np.column_stack([np.ones(n), x])
        prob = 1.0 / (1.0 + np.exp(-(x1 @ fit.coefficients)))
        if np.abs(x1.T @ (y - prob)).max() >= 1e-5:
            failures.append(f"irls-score case {case}")
        checked += 1

    # stepwise search: the accepted-move AIC sequence strictly decreases
    for case in range(200):
        rng = np.random.default_rng(930_000 + case)
        n = int(rng.integers(10, 21))
        p = int(rng.integers(1, 6))
        x = rng.normal(size=(n, p))
        beta = rng.normal(size=p) * rng.integers(0, 2, size=p)
        y = x @ beta + rng.normal(size=n)
        sel = stepwise_aic(make_dataset(x, y), Family.LINEAR)
        if not np.all(np.diff(np.asarray(sel.trace)) < 0.0):
            failures.append(f"stepwise-trace case {case}")

    # pruning terminates, deletes at least one case per pass, keeps a floor
    for case in range(200):
        rng = np.random.default_rng(940_000 + case)
        n = int(rng.integers(6, 21))
        p = int(rng.integers(1, 4))
        x = rng.normal(size=(n, p))
        y = x @ rng.normal(size=p) + rng.standard_t(df=2, size=n)
        sel = outlier_prune(make_dataset(x, y))
        deleted = [i for batch in sel.trace for i in batch]
        ok = (
            len(sel.retained) >= min(n, p + 2)
            and all(len(batch) > 0 for batch in sel.trace)
            and sorted(deleted + list(sel.retained)) == list(range(n))
        )
        if not ok:
            failures.append(f"prune case {case}")

    # copula design: uniform marginals with the requested correlation
    for case in range(200):
        rng = np.random.default_rng(950_000 + case)
        rho = float(rng.choice([0.0, 0.3, 0.6, 0.95]))
        p = int(rng.integers(2, 6))
        u = correlated_uniform_design(2000, p, rho, rng)
        corr = np.corrcoef(u, rowvar=False)
        off = corr[np.triu_indices(p, k=1)]
        ok = (
            abs(u.mean() - 0.5) < 0.05
            and np.abs(off - rho).max() < 0.1
            and u.min() > 0.0
            and u.max() < 1.0
        )
        if not ok:
            failures.append(f"copula case {case}")

    # predictive t densities integrate to one
    for case in range(200):
        rng = np.random.default_rng(960_000 + case)
        loc = float(rng.uniform(-3.0, 3.0))
        scale = float(rng.uniform(0.05, 4.0))
        df = float(rng.uniform(2.1, 50.0))
        total, _ = quad(
            lambda u: math.exp(
                -t_neg_log_density(np.array([u]), loc, scale, df)[0]
            ),
            -np.inf,
            np.inf,
            limit=200,
        )
        if abs(total - 1.0) >= 1e-6:
            failures.append(f"normalization case {case}")

    assert not failures, f"{len(failures)} property failures: {failures[:10]}"
