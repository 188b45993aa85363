"""Least-squares fitting and the predictive distributions built from fits.

Fits always include an intercept; included_columns names the design columns
that enter beside it. A fit must leave at least one residual degree of
freedom, otherwise the predictive variance is undefined and the fit is
refused rather than patched.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from . import boxcox
from .randgen import Dataset

# relative size below which a triangular-factor diagonal counts as zero
_RANK_TOL = 1e-12
# predictive scale never drops below this
SCALE_FLOOR = 1e-8


class UnidentifiableFitError(ValueError):
    """Design is rank deficient or leaves no residual degrees of freedom."""


class PredictionKind(str, enum.Enum):
    T = "t"
    TRANSFORMED_T = "transformed_t"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class PredictiveDistribution:
    """One-point predictive law under log scoring.

    T: location-scale t with loc/scale/df. TRANSFORMED_T: the same law on
    the transformed scale, mapped back through the power transform with
    exponent lam. BERNOULLI: success probability prob.
    """

    kind: PredictionKind
    loc: float = 0.0
    scale: float = 1.0
    df: float = math.inf
    lam: float | None = None
    prob: float | None = None
    scale_floored: bool = False


@dataclass(frozen=True)
class FittedLinearModel:
    """OLS fit of the response (possibly transformed) on selected columns."""

    coefficients: np.ndarray  # intercept first, then included columns
    sigma2_hat: float
    df_resid: int
    gram_inverse: np.ndarray  # (X'X)^{-1} for the intercept-augmented design
    included_columns: tuple[int, ...]
    n_fit: int
    lam: float | None = None  # set when the response was transform-scaled

    def model_matrix(self, design: np.ndarray) -> np.ndarray:
        design = np.atleast_2d(np.asarray(design, dtype=float))
        cols = list(self.included_columns)
        return np.column_stack([np.ones(design.shape[0]), design[:, cols]])

    def predict_mean(self, design: np.ndarray) -> np.ndarray:
        return self.model_matrix(design) @ self.coefficients

    def leverage(self, design: np.ndarray) -> np.ndarray:
        """Rowwise x'(X'X)^{-1}x for new rows (not in [0,1) in general)."""
        z = self.model_matrix(design)
        return np.einsum("ij,jk,ik->i", z, self.gram_inverse, z)

    def with_variance(self, sigma2: float, df: int) -> "FittedLinearModel":
        return replace(self, sigma2_hat=float(sigma2), df_resid=int(df))


def _design_matrix(data: Dataset, columns) -> np.ndarray:
    cols = list(columns)
    return np.column_stack([np.ones(data.n), data.design[:, cols]])


def ols_fit(
    data: Dataset, columns, response: np.ndarray | None = None
) -> FittedLinearModel:
    """Least squares of the response on an intercept plus selected columns.

    response overrides data.response (used when fitting on a transformed
    scale). Raises UnidentifiableFitError on rank deficiency or when fewer
    than k+2 rows leave no residual degree of freedom.
    """
    cols = tuple(int(c) for c in columns)
    y = data.response if response is None else np.asarray(response, float)
    x = _design_matrix(data, cols)
    n, k1 = x.shape
    if n < k1 + 1:
        raise UnidentifiableFitError(
            f"need at least {k1 + 1} rows to fit {k1} coefficients"
        )
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    if diag.min() <= diag.max() * _RANK_TOL:
        raise UnidentifiableFitError("design matrix is rank deficient")
    beta = solve_triangular(r, q.T @ y, lower=False)
    rinv = solve_triangular(r, np.eye(k1), lower=False)
    gram_inv = rinv @ rinv.T
    resid = y - x @ beta
    df = n - k1
    sse = float(resid @ resid)
    return FittedLinearModel(
        coefficients=beta,
        sigma2_hat=sse / df,
        df_resid=df,
        gram_inverse=gram_inv,
        included_columns=cols,
        n_fit=n,
    )


def predict_dist(model: FittedLinearModel, x) -> PredictiveDistribution:
    """Location-scale t predictive at one new design row."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    mu = float(model.predict_mean(x)[0])
    q = float(model.leverage(x)[0])
    scale = math.sqrt(model.sigma2_hat * (1.0 + q))
    floored = scale < SCALE_FLOOR
    if floored:
        scale = SCALE_FLOOR
    kind = PredictionKind.T if model.lam is None else PredictionKind.TRANSFORMED_T
    return PredictiveDistribution(
        kind=kind,
        loc=mu,
        scale=scale,
        df=float(model.df_resid),
        lam=model.lam,
        scale_floored=floored,
    )


def studentized_residuals(model: FittedLinearModel, data: Dataset) -> np.ndarray:
    """Externally studentized residuals of the model's own fitting rows.

    data must be the sample the model was fitted on. Requires df_resid >= 2
    (the leave-one-out variance needs a positive degree of freedom). A row
    with leverage 1 gets +inf; a row whose leave-one-out variance vanishes
    gets 0 when its residual is zero, signed inf otherwise.
    """
    if model.df_resid < 2:
        raise UnidentifiableFitError("external studentization needs df_resid >= 2")
    x = _design_matrix(data, model.included_columns)
    if x.shape[0] != model.n_fit:
        raise ValueError("data does not match the fitted sample size")
    if model.lam is None:
        y = data.response
    else:
        y = boxcox.transform(data.response, model.lam)
    e = y - x @ model.coefficients
    h = np.einsum("ij,jk,ik->i", x, model.gram_inverse, x)
    sse = model.sigma2_hat * model.df_resid
    out = np.empty(data.n)
    one_minus_h = 1.0 - h
    for i in range(data.n):
        if one_minus_h[i] <= _RANK_TOL:
            out[i] = math.inf
            continue
        s2_loo = (sse - e[i] ** 2 / one_minus_h[i]) / (model.df_resid - 1)
        if s2_loo <= 0.0:
            out[i] = 0.0 if e[i] == 0.0 else math.copysign(math.inf, e[i])
            continue
        out[i] = e[i] / math.sqrt(s2_loo * one_minus_h[i])
    return out


def linear_aic(model: FittedLinearModel) -> float:
    """n*ln(SSE/n) + 2*(k+1); -inf on a perfect fit."""
    sse = model.sigma2_hat * model.df_resid
    k1 = len(model.coefficients)
    if sse <= 0.0:
        return -math.inf
    return model.n_fit * math.log(sse / model.n_fit) + 2.0 * k1


def boxcox_profile_loglik(lam: float, data: Dataset, columns=(0,)) -> float:
    """Profile log likelihood of the transform exponent.

    -(n/2)*ln(SSE_lam/n) + (lam-1)*sum(ln y), with SSE_lam from the OLS fit
    of the transformed response. +inf on a perfect fit (the supremum).
    """
    t = boxcox.transform(data.response, lam)
    model = ols_fit(data, columns, response=t)
    sse = model.sigma2_hat * model.df_resid
    log_y_sum = float(np.log(data.response).sum())
    if sse <= 0.0:
        return math.inf
    n = data.n
    return -0.5 * n * math.log(sse / n) + (lam - 1.0) * log_y_sum
