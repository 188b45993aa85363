"""Model selection rules: transform grid search, stepwise AIC, case pruning.

Each rule returns a SelectedModel describing *what* was chosen plus a trace
of how; estimation is a separate step so the same selection can be refit on
different data.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dpotrf, dtrtrs

from .glm import logit_aic, logit_fit
from .linmod import (
    UnidentifiableFitError,
    boxcox_profile_loglik,
    linear_aic,
    ols_fit,
    studentized_residuals,
)
from .randgen import Dataset

BOXCOX_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)
OUTLIER_THRESHOLD = 3.0
_MAX_STEPWISE_MOVES = 10_000


class SelectionKind(str, enum.Enum):
    TRANSFORM = "transform"
    SUBSET = "subset"
    CASES = "cases"


class Family(str, enum.Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class SelectedModel:
    """Outcome of one selection rule.

    Exactly one of lam / columns / retained is meaningful, per kind. trace
    records the search path: (lam, loglik) pairs for the transform grid, the
    accepted-move AIC sequence for stepwise, per-pass deleted case tuples
    for pruning.
    """

    kind: SelectionKind
    lam: float | None = None
    columns: tuple[int, ...] | None = None
    retained: tuple[int, ...] | None = None
    trace: tuple = ()
    flags: tuple[str, ...] = ()


def boxcox_select(data: Dataset, grid=BOXCOX_GRID) -> SelectedModel:
    """Pick the grid exponent maximizing the profile log likelihood.

    Ties break toward the exponent nearest 1, then toward the larger one.
    """
    if not grid:
        raise ValueError("empty grid")
    trace = tuple(
        (float(lam), boxcox_profile_loglik(lam, data)) for lam in grid
    )
    best = max(trace, key=lambda t: (t[1], -abs(t[0] - 1.0), t[0]))
    return SelectedModel(kind=SelectionKind.TRANSFORM, lam=best[0], trace=trace)


def _fit_aic(data: Dataset, family: Family, columns) -> float | None:
    """AIC of one candidate subset; None when the fit is not identifiable."""
    if data.n < len(columns) + 2:
        return None  # fewer than k+2 rows: no residual degree of freedom
    try:
        if family is Family.LINEAR:
            return linear_aic(ols_fit(data, columns))
        return logit_aic(logit_fit(data, columns))
    except UnidentifiableFitError:
        return None


class _GramAic:
    """Linear AIC for many column subsets of one dataset.

    Precomputes the full Gram matrix once; each candidate then costs a small
    Cholesky plus one triangular solve (SSE = y'y - ||L^-1 X_s'y||^2),
    matching the per-fit AIC to rounding error.
    """

    def __init__(self, data: Dataset) -> None:
        x1 = np.column_stack([np.ones(data.n), data.design])
        self.gram = x1.T @ x1
        self.xty = x1.T @ data.response
        self.yty = float(data.response @ data.response)
        self.n = data.n

    def aic(self, columns) -> float | None:
        k1 = len(columns) + 1
        if self.n < k1 + 1:
            return None
        idx = np.empty(k1, dtype=np.intp)
        idx[0] = 0
        for i, c in enumerate(columns, 1):
            idx[i] = c + 1
        sub = self.gram[idx[:, None], idx]
        chol, info = dpotrf(sub, lower=1, overwrite_a=1)
        if info != 0:
            return None
        diag = chol.diagonal()
        if diag.min() <= diag.max() * 1e-12:
            return None
        z, info = dtrtrs(chol, self.xty[idx], lower=1)
        if info != 0:
            return None
        sse = self.yty - float(z @ z)
        if sse <= 0.0:
            return -math.inf
        return self.n * math.log(sse / self.n) + 2.0 * k1


def stepwise_aic(
    data: Dataset,
    family: Family,
    scope=None,
    start: str = "full",
) -> SelectedModel:
    """Greedy bidirectional AIC search over column subsets.

    Starts from the full scope (default) or the intercept-only model. Each
    step evaluates single-column deletions (ascending column) then additions
    (ascending column) and takes the best strict AIC improvement; deletions
    win ties. The accepted-move AIC sequence is strictly decreasing, which
    bounds the search by the number of subsets.
    """
    scope = tuple(range(data.p)) if scope is None else tuple(int(c) for c in scope)
    if start not in ("full", "null"):
        raise ValueError("start must be 'full' or 'null'")
    if family is Family.LINEAR:
        scorer = _GramAic(data).aic
    else:
        scorer = lambda cols: _fit_aic(data, family, cols)
    flags: list[str] = []
    current: tuple[int, ...] = ()
    if start == "full":
        aic = scorer(scope)
        if aic is None:
            flags.append("degenerate-start")
        else:
            current = scope
    if start == "null" or "degenerate-start" in flags:
        aic = scorer(())
        if aic is None:
            raise UnidentifiableFitError("intercept-only model is unfittable")

    trace = [aic]
    for _ in range(_MAX_STEPWISE_MOVES):
        best_aic = aic
        best_cols = None
        for col in current:  # deletions first
            cand = tuple(c for c in current if c != col)
            cand_aic = scorer(cand)
            if cand_aic is not None and cand_aic < best_aic:
                best_aic, best_cols = cand_aic, cand
        for col in scope:  # then additions
            if col in current:
                continue
            cand = tuple(sorted(current + (col,)))
            cand_aic = scorer(cand)
            if cand_aic is not None and cand_aic < best_aic:
                best_aic, best_cols = cand_aic, cand
        if best_cols is None:
            break
        current, aic = best_cols, best_aic
        trace.append(aic)
    else:
        raise RuntimeError("stepwise search failed to terminate")

    if family is Family.LOGISTIC:
        final = logit_fit(data, current)
        if not final.converged:
            flags.append("separation")
    return SelectedModel(
        kind=SelectionKind.SUBSET,
        columns=tuple(sorted(current)),
        trace=tuple(trace),
        flags=tuple(flags),
    )


def outlier_prune(
    data: Dataset, threshold: float = OUTLIER_THRESHOLD
) -> SelectedModel:
    """Iteratively delete cases with |studentized residual| > threshold.

    Whole flagged batches go per pass, most extreme first; the retained set
    never drops below k+2 cases (the fit floor), and screening stops when
    fewer than k+3 remain (studentization needs two residual degrees of
    freedom). Termination is guaranteed: every pass deletes at least one
    case or stops.
    """
    cols = tuple(range(data.p))
    floor = data.p + 2
    retained = list(range(data.n))
    trace: list[tuple[int, ...]] = []
    flags: set[str] = set()
    while True:
        if len(retained) < data.p + 3:
            flags.add("prune-floor")
            break
        sub = data.subset(retained)
        model = ols_fit(sub, cols)
        absr = np.abs(studentized_residuals(model, sub))
        flagged = np.flatnonzero(absr > threshold)
        if flagged.size == 0:
            break
        order = np.lexsort((flagged, -absr[flagged]))
        flagged = flagged[order]  # most extreme first, ties by index
        n_deletable = len(retained) - floor
        if flagged.size > n_deletable:
            flagged = flagged[:n_deletable]
            flags.add("prune-floor")
        deleted = sorted(retained[i] for i in flagged)
        trace.append(tuple(deleted))
        drop = set(flagged.tolist())
        retained = [idx for pos, idx in enumerate(retained) if pos not in drop]
    return SelectedModel(
        kind=SelectionKind.CASES,
        retained=tuple(retained),
        trace=tuple(trace),
        flags=tuple(sorted(flags)),
    )
