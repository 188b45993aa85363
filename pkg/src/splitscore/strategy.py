"""The four prediction strategies built around a data split.

FD selects and estimates on all of Z. SD selects on Z1 and estimates on Z2.
SAFE selects on Z1 and estimates on all of Z. VALID selects and estimates on
Z1, then replaces the residual variance with one computed from Z2 (with
|Z2| - 1 degrees of freedom); it has no binary-response analogue.

Selection and estimation are deliberately separate passes so that paired
strategies can share one selection and so the decomposition can refit a
selected form on other data.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from . import boxcox
from .glm import FittedLogit, logit_fit
from .linmod import (
    SCALE_FLOOR,
    FittedLinearModel,
    ols_fit,
)
from .randgen import Dataset, RandomStream, ResponseKind, Scenario, ScenarioParams
from .scoring import (
    bernoulli_neg_log_prob,
    cap_scores,
    t_neg_log_density,
    transformed_t_neg_log_density,
)
from .selection import (
    BOXCOX_GRID,
    Family,
    SelectedModel,
    boxcox_select,
    outlier_prune,
    stepwise_aic,
)

# guard against floor((1/3)*18) = 5 from binary rounding of 1/3
_SPLIT_EPS = 1e-9


class Strategy(str, enum.Enum):
    FD = "FD"
    SD = "SD"
    SAFE = "SAFE"
    VALID = "VALID"


ALL_STRATEGIES = (Strategy.FD, Strategy.SD, Strategy.SAFE, Strategy.VALID)


@dataclass(frozen=True)
class SplitPlan:
    """A partition of {0..n-1} into selection (Z1) and estimation (Z2) rows."""

    selection_indices: tuple[int, ...]
    estimation_indices: tuple[int, ...]
    fraction: float

    def __post_init__(self) -> None:
        overlap = set(self.selection_indices) & set(self.estimation_indices)
        if overlap:
            raise ValueError("selection and estimation rows overlap")
        if not self.selection_indices or not self.estimation_indices:
            raise ValueError("both split parts must be nonempty")


def split_size(n: int, fraction: float) -> int:
    """|Z1| = floor(fraction * n), robust to 1/3-style float rounding."""
    return int(math.floor(fraction * n + _SPLIT_EPS))


def split_data(n: int, fraction: float, stream: RandomStream) -> SplitPlan:
    """Randomly partition n rows into Z1 (selection) and Z2 (estimation)."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    m1 = split_size(n, fraction)
    if m1 < 1 or m1 >= n:
        raise ValueError(f"fraction {fraction} leaves an empty part at n={n}")
    perm = stream.permutation(n)
    return SplitPlan(
        selection_indices=tuple(sorted(int(i) for i in perm[:m1])),
        estimation_indices=tuple(sorted(int(i) for i in perm[m1:])),
        fraction=float(fraction),
    )


@dataclass(frozen=True)
class StrategyOptions:
    """Switches shared by every strategy run."""

    jacobian: bool = True
    stepwise_start: str = "full"
    outlier_transfer: str = "none"  # "none": SD fits Z2 directly; "rule": re-prune
    boxcox_grid: tuple[float, ...] = BOXCOX_GRID

    def __post_init__(self) -> None:
        if self.stepwise_start not in ("full", "null"):
            raise ValueError("stepwise_start must be 'full' or 'null'")
        if self.outlier_transfer not in ("none", "rule"):
            raise ValueError("outlier_transfer must be 'none' or 'rule'")


DEFAULT_OPTIONS = StrategyOptions()


@dataclass
class PredictiveModel:
    """A strategy's end product: a fitted predictive rule plus audit trail.

    estimation_rows records which original rows the final fit used (for the
    pruning scenario this can differ from what the selection run retained).
    """

    strategy: Strategy
    selected: SelectedModel
    fitted: FittedLinearModel | FittedLogit
    estimation_rows: tuple[int, ...]
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class StrategyResult:
    """Mean evaluation score of one strategy in one replication."""

    strategy: Strategy
    replication_id: int
    mean_score: float
    eval_count: int
    n_capped: int
    flags: tuple[str, ...] = ()


def select_model(
    params: ScenarioParams, data: Dataset, options: StrategyOptions = DEFAULT_OPTIONS
) -> SelectedModel:
    """Run the scenario's selection rule on the given rows."""
    if params.scenario is Scenario.BOXCOX:
        return boxcox_select(data, options.boxcox_grid)
    if params.scenario is Scenario.VARSEL:
        return stepwise_aic(data, Family.LINEAR, start=options.stepwise_start)
    if params.scenario is Scenario.BINARY:
        return stepwise_aic(data, Family.LOGISTIC, start=options.stepwise_start)
    if params.scenario is Scenario.OUTLIER:
        return outlier_prune(data)
    raise ValueError(f"unknown scenario {params.scenario!r}")


def _fit_subset_linear(
    data: Dataset, rows, columns, response_transform: float | None
) -> tuple[FittedLinearModel, list[str]]:
    """OLS on selected rows/columns with intercept-only fallback."""
    sub = data.subset(rows)
    flags: list[str] = []
    cols = tuple(columns)
    if sub.n < len(cols) + 2:
        cols = ()
        flags.append("fallback-intercept")
    resp = None
    if response_transform is not None:
        resp = boxcox.transform(sub.response, response_transform)
    fit = ols_fit(sub, cols, response=resp)
    if response_transform is not None:
        fit = replace(fit, lam=response_transform)
    return fit, flags


def _fit_subset_logit(data: Dataset, rows, columns) -> tuple[FittedLogit, list[str]]:
    sub = data.subset(rows)
    flags: list[str] = []
    cols = tuple(columns)
    if sub.n < len(cols) + 2:
        cols = ()
        flags.append("fallback-intercept")
    fit = logit_fit(sub, cols)
    if not fit.converged:
        flags.append("separation")
    return fit, flags


def apply_strategy(
    strategy: Strategy,
    params: ScenarioParams,
    data: Dataset,
    plan: SplitPlan,
    options: StrategyOptions = DEFAULT_OPTIONS,
    selected: SelectedModel | None = None,
) -> PredictiveModel:
    """Produce a strategy's fitted predictive rule for one training set.

    selected, when given, skips the selection pass (used to share one
    selection across SD/SAFE/VALID, or FD's own across nothing).
    """
    if strategy is Strategy.VALID and params.scenario is Scenario.BINARY:
        raise ValueError("VALID is undefined for a binary response")
    all_rows = tuple(range(data.n))
    sel_rows = all_rows if strategy is Strategy.FD else plan.selection_indices
    if selected is None:
        selected = select_model(params, data.subset(sel_rows), options)
    flags = list(selected.flags)

    if strategy is Strategy.FD:
        est_rows = all_rows
    elif strategy is Strategy.SD:
        est_rows = plan.estimation_indices
    elif strategy is Strategy.SAFE:
        est_rows = all_rows
    else:  # VALID: coefficient fit on Z1, variance from Z2 afterwards
        est_rows = plan.selection_indices

    scenario = params.scenario
    if scenario is Scenario.OUTLIER:
        fitted, est_rows, extra = _estimate_outlier(
            strategy, data, plan, selected, options
        )
        flags.extend(extra)
    elif scenario is Scenario.BOXCOX:
        fitted, extra = _fit_subset_linear(data, est_rows, (0,), selected.lam)
        flags.extend(extra)
    elif scenario is Scenario.VARSEL:
        fitted, extra = _fit_subset_linear(data, est_rows, selected.columns, None)
        flags.extend(extra)
    else:  # binary
        fitted, extra = _fit_subset_logit(data, est_rows, selected.columns)
        flags.extend(extra)

    if strategy is Strategy.VALID:
        fitted, extra = _valid_variance(fitted, data, plan)
        flags.extend(extra)

    return PredictiveModel(
        strategy=strategy,
        selected=selected,
        fitted=fitted,
        estimation_rows=tuple(est_rows),
        flags=tuple(dict.fromkeys(flags)),
    )


def _estimate_outlier(
    strategy: Strategy,
    data: Dataset,
    plan: SplitPlan,
    selected: SelectedModel,
    options: StrategyOptions,
) -> tuple[FittedLinearModel, tuple[int, ...], list[str]]:
    """Estimation step of the pruning scenario.

    FD fits the cases the selection retained. SD fits all of Z2 directly
    unless the transfer option re-applies the rule to Z2. SAFE re-applies the
    rule to all of Z and fits the retained cases. VALID fits the cases the
    selection retained within Z1 (variance replacement happens later).
    """
    flags: list[str] = []
    cols = tuple(range(data.p))
    if strategy is Strategy.FD:
        rows = selected.retained  # selection ran on all rows
    elif strategy is Strategy.VALID:
        rows = tuple(plan.selection_indices[i] for i in selected.retained)
    elif strategy is Strategy.SAFE:
        derived = outlier_prune(data)
        flags.extend(f for f in derived.flags)
        rows = derived.retained
    else:  # SD
        if options.outlier_transfer == "rule":
            sub_sel = outlier_prune(data.subset(plan.estimation_indices))
            flags.extend(sub_sel.flags)
            rows = tuple(plan.estimation_indices[i] for i in sub_sel.retained)
        else:
            rows = plan.estimation_indices
    fit, extra = _fit_subset_linear(data, rows, cols, None)
    flags.extend(extra)
    return fit, tuple(rows), flags


def _valid_variance(
    fitted: FittedLinearModel, data: Dataset, plan: SplitPlan
) -> tuple[FittedLinearModel, list[str]]:
    """Replace sigma2/df with the held-out residual variance from Z2."""
    z2 = data.subset(plan.estimation_indices)
    if z2.n < 2:
        raise ValueError("VALID needs at least 2 held-out rows")
    mu = fitted.predict_mean(z2.design)
    if fitted.lam is None:
        y2 = z2.response
    else:
        y2 = boxcox.transform(z2.response, fitted.lam)
    resid = y2 - mu
    df = z2.n - 1
    sigma2 = float(resid @ resid) / df
    flags = ["sigma-floor"] if math.sqrt(sigma2) < SCALE_FLOOR else []
    return fitted.with_variance(sigma2, df), flags


def model_scores(
    model: PredictiveModel,
    eval_data: Dataset,
    options: StrategyOptions = DEFAULT_OPTIONS,
):
    """Capped per-point scores of a fitted rule on an evaluation set.

    Returns (scores, n_capped, flags).
    """
    if eval_data.n == 0:
        raise ValueError("empty evaluation set")
    flags: list[str] = []
    fitted = model.fitted
    if isinstance(fitted, FittedLogit):
        if eval_data.response_kind is not ResponseKind.BINARY:
            raise ValueError("binary predictive needs a binary response")
        prob = expit(fitted.predict_linear(eval_data.design))
        raw = bernoulli_neg_log_prob(eval_data.response, prob)
    else:
        mu = fitted.predict_mean(eval_data.design)
        q = fitted.leverage(eval_data.design)
        scale = np.sqrt(fitted.sigma2_hat * (1.0 + q))
        if (scale < SCALE_FLOOR).any():
            flags.append("scale-floor")
            scale = np.maximum(scale, SCALE_FLOOR)
        df = float(fitted.df_resid)
        if fitted.lam is None:
            raw = t_neg_log_density(eval_data.response, mu, scale, df)
        else:
            raw = transformed_t_neg_log_density(
                eval_data.response, mu, scale, df, fitted.lam, options.jacobian
            )
    scores, n_capped = cap_scores(raw)
    return scores, n_capped, flags


def evaluate(
    model: PredictiveModel,
    eval_data: Dataset,
    options: StrategyOptions = DEFAULT_OPTIONS,
    replication_id: int = 0,
) -> StrategyResult:
    """Mean capped log score of a fitted rule over an evaluation set."""
    scores, n_capped, score_flags = model_scores(model, eval_data, options)
    return StrategyResult(
        strategy=model.strategy,
        replication_id=replication_id,
        mean_score=float(scores.mean()),
        eval_count=eval_data.n,
        n_capped=n_capped,
        flags=tuple(dict.fromkeys(list(model.flags) + score_flags)),
    )


def run_replication(
    params: ScenarioParams,
    data: Dataset,
    plan: SplitPlan,
    strategies=ALL_STRATEGIES,
    options: StrategyOptions = DEFAULT_OPTIONS,
) -> dict[Strategy, PredictiveModel]:
    """Fit every requested strategy on one training set, sharing selections.

    FD runs the selection rule on all of Z; SD, SAFE and VALID share the
    single Z1 selection.
    """
    strategies = tuple(strategies)
    out: dict[Strategy, PredictiveModel] = {}
    sel_full = None
    sel_part = None
    for s in strategies:
        if s is Strategy.FD:
            if sel_full is None:
                sel_full = select_model(params, data, options)
            chosen = sel_full
        else:
            if sel_part is None:
                sel_part = select_model(
                    params, data.subset(plan.selection_indices), options
                )
            chosen = sel_part
        out[s] = apply_strategy(s, params, data, plan, options, selected=chosen)
    return out
