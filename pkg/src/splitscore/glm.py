"""Logistic regression via iteratively reweighted least squares.

Fits always include an intercept. Separation is not an error: the loop
retains its last finite iterate and reports converged=False, since a
diverging fit still defines predictive probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .linmod import PredictionKind, PredictiveDistribution, UnidentifiableFitError, _RANK_TOL
from .randgen import Dataset

_WEIGHT_FLOOR = 1e-10
_DEV_RTOL = 1e-9
PROB_CLIP = 1e-10
# |linear predictor| at which expit reaches the clip bound: fitted
# probabilities are numerically pinned at 0/1, i.e. the MLE is infinite
_ETA_PINNED = -math.log(PROB_CLIP) - 1e-9


@dataclass(frozen=True)
class FittedLogit:
    """Logistic fit of a 0/1 response on selected columns."""

    coefficients: np.ndarray  # intercept first
    deviance: float
    converged: bool
    iterations: int
    included_columns: tuple[int, ...]
    n_fit: int

    def model_matrix(self, design: np.ndarray) -> np.ndarray:
        design = np.atleast_2d(np.asarray(design, dtype=float))
        cols = list(self.included_columns)
        return np.column_stack([np.ones(design.shape[0]), design[:, cols]])

    def predict_linear(self, design: np.ndarray) -> np.ndarray:
        return self.model_matrix(design) @ self.coefficients


def _deviance(y: np.ndarray, prob: np.ndarray) -> float:
    p = np.clip(prob, PROB_CLIP, 1.0 - PROB_CLIP)
    return float(-2.0 * (y * np.log(p) + (1.0 - y) * np.log1p(-p)).sum())


def logit_fit(data: Dataset, columns, max_iter: int = 50) -> FittedLogit:
    """IRLS from beta = 0, converging on relative deviance change < 1e-9."""
    cols = tuple(int(c) for c in columns)
    y = data.response
    x = np.column_stack([np.ones(data.n), data.design[:, list(cols)]])
    n, k1 = x.shape
    if n < k1 + 1:
        raise UnidentifiableFitError(
            f"need at least {k1 + 1} rows to fit {k1} coefficients"
        )
    diag = np.abs(np.diag(np.linalg.qr(x, mode="r")))
    if diag.min() <= diag.max() * _RANK_TOL:
        raise UnidentifiableFitError("design matrix is rank deficient")

    beta = np.zeros(k1)
    dev = _deviance(y, np.full(n, 0.5))
    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        eta = x @ beta
        p = expit(eta)
        w = np.maximum(p * (1.0 - p), _WEIGHT_FLOOR)
        z = eta + (y - p) / w
        xw = x * w[:, None]
        try:
            new_beta = np.linalg.solve(x.T @ xw, xw.T @ z)
        except np.linalg.LinAlgError:
            break  # weights collapsed (separation); keep last iterate
        if not np.isfinite(new_beta).all():
            break
        beta = new_beta
        new_dev = _deviance(y, expit(x @ beta))
        if abs(new_dev - dev) < _DEV_RTOL * (abs(dev) + 1e-300):
            dev = new_dev
            converged = True
            break
        dev = new_dev
    if converged and np.abs(x @ beta).max() >= _ETA_PINNED:
        # deviance stabilized only because fitted probabilities hit the
        # clip bound; the likelihood has no finite maximizer (separation)
        converged = False
    return FittedLogit(
        coefficients=beta,
        deviance=dev,
        converged=converged,
        iterations=iterations,
        included_columns=cols,
        n_fit=n,
    )


def logit_aic(model: FittedLogit) -> float:
    """Deviance + 2*(k+1)."""
    return model.deviance + 2.0 * len(model.coefficients)


def predict_prob(model: FittedLogit, x) -> PredictiveDistribution:
    """Bernoulli predictive at one new design row, clipped off 0 and 1."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    p = float(expit(model.predict_linear(x))[0])
    p = min(max(p, PROB_CLIP), 1.0 - PROB_CLIP)
    return PredictiveDistribution(kind=PredictionKind.BERNOULLI, prob=p)
