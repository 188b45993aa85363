"""OLS fitting, t predictive distributions, and residual diagnostics."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitscore.linmod import (
    FittedLinearModel,
    PredictionKind,
    UnidentifiableFitError,
    boxcox_profile_loglik,
    linear_aic,
    ols_fit,
    predict_dist,
    studentized_residuals,
)
from splitscore.boxcox import transform
from splitscore.randgen import Dataset

from conftest import make_dataset

# three-point line fit with closed-form everything
THREE_POINT = make_dataset([[0.0], [1.0], [2.0]], [0.0, 1.0, 1.0])
THREE_POINT_AIC = -4.671115273688494  # 3*ln(1/18) + 4


def test_three_point_closed_form():
    fit = ols_fit(THREE_POINT, columns=(0,))
    np.testing.assert_allclose(fit.coefficients, [1.0 / 6.0, 0.5], atol=1e-10)
    assert fit.sigma2_hat == pytest.approx(1.0 / 6.0, abs=1e-10)
    assert fit.df_resid == 1
    assert fit.n_fit == 3


def test_three_point_predictive():
    fit = ols_fit(THREE_POINT, columns=(0,))
    pred = predict_dist(fit, [1.0])
    assert pred.kind is PredictionKind.T
    assert pred.loc == pytest.approx(2.0 / 3.0, abs=1e-10)
    assert pred.scale**2 == pytest.approx(2.0 / 9.0, abs=1e-10)
    assert pred.df == 1.0


def test_three_point_aic():
    fit = ols_fit(THREE_POINT, columns=(0,))
    assert linear_aic(fit) == pytest.approx(THREE_POINT_AIC, abs=1e-10)


def test_gram_inverse_matches_direct_inverse():
    rng = np.random.default_rng(3)
    data = make_dataset(rng.normal(size=(25, 4)), rng.normal(size=25))
    fit = ols_fit(data, columns=(0, 2, 3))
    x = np.column_stack([np.ones(25), data.design[:, [0, 2, 3]]])
    np.testing.assert_allclose(fit.gram_inverse, np.linalg.inv(x.T @ x), atol=1e-10)


def test_too_few_rows_raises():
    data = make_dataset([[0.0], [1.0]], [0.0, 1.0])
    with pytest.raises(UnidentifiableFitError):
        ols_fit(data, columns=(0,))


def test_rank_deficiency_raises():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(12, 2))
    x = np.column_stack([x, x[:, 0]])  # duplicate column
    data = make_dataset(x, rng.normal(size=12))
    with pytest.raises(UnidentifiableFitError):
        ols_fit(data, columns=(0, 1, 2))


def test_intercept_only_fit():
    data = make_dataset(np.zeros((5, 1)), [1.0, 2.0, 3.0, 4.0, 5.0])
    fit = ols_fit(data, columns=())
    np.testing.assert_allclose(fit.coefficients, [3.0], atol=1e-12)
    assert fit.sigma2_hat == pytest.approx(2.5, abs=1e-12)  # var with ddof=1
    assert fit.df_resid == 4


def test_with_variance_replaces_scale_only():
    fit = ols_fit(THREE_POINT, columns=(0,))
    swapped = fit.with_variance(3.0, 2)
    assert swapped.sigma2_hat == 3.0
    assert swapped.df_resid == 2
    np.testing.assert_array_equal(swapped.coefficients, fit.coefficients)
    np.testing.assert_array_equal(swapped.gram_inverse, fit.gram_inverse)


def test_studentized_residuals_flag_gross_outlier():
    # ten points on an exact line plus one wild case
    x = np.arange(11.0).reshape(-1, 1)
    y = 2.0 + 0.5 * np.arange(11.0)
    y[5] += 50.0
    data = make_dataset(x, y)
    fit = ols_fit(data, columns=(0,))
    r = studentized_residuals(fit, data)
    assert np.argmax(np.abs(r)) == 5
    assert abs(r[5]) > 3.0
    assert np.isfinite(r).sum() >= 10


def test_studentized_residuals_oracle():
    # direct leave-one-out formula on a small random fit
    rng = np.random.default_rng(5)
    data = make_dataset(rng.normal(size=(9, 1)), rng.normal(size=9))
    fit = ols_fit(data, columns=(0,))
    r = studentized_residuals(fit, data)
    x = np.column_stack([np.ones(9), data.design[:, 0]])
    h = np.einsum("ij,jk,ik->i", x, np.linalg.inv(x.T @ x), x)
    e = data.response - x @ fit.coefficients
    n, k1 = 9, 2
    sse = e @ e
    for i in range(9):
        s2_loo = (sse - e[i] ** 2 / (1.0 - h[i])) / (n - k1 - 1)
        expect = e[i] / math.sqrt(s2_loo * (1.0 - h[i]))
        assert r[i] == pytest.approx(expect, rel=1e-10)


def test_perfect_fit_aic_is_minus_infinity():
    # constant response: the intercept-only fit is exact in floating point
    data = make_dataset(np.zeros((4, 1)), [5.0, 5.0, 5.0, 5.0])
    fit = ols_fit(data, columns=())
    assert fit.sigma2_hat == 0.0
    assert linear_aic(fit) == -math.inf


def test_near_perfect_fit_aic_is_very_negative():
    data = make_dataset([[0.0], [1.0], [2.0]], [1.0, 3.0, 5.0])
    fit = ols_fit(data, columns=(0,))
    assert fit.sigma2_hat < 1e-20
    assert linear_aic(fit) < -100.0


def test_profile_loglik_peaks_at_generating_lambda():
    rng = np.random.default_rng(6)
    x = rng.uniform(size=(400, 1))
    y = np.exp(1.0 + x[:, 0] + 0.3 * rng.standard_normal(400))  # lam=0 truth
    data = make_dataset(x, y)
    grid = (-1.0, -0.5, 0.0, 0.5, 1.0)
    ll = [boxcox_profile_loglik(lam, data, columns=(0,)) for lam in grid]
    assert grid[int(np.argmax(ll))] == 0.0


def test_profile_loglik_scale_equivariant_argmax():
    rng = np.random.default_rng(7)
    x = rng.uniform(size=(200, 1))
    y = (1.0 + 0.5 * x[:, 0] + 0.1 * rng.standard_normal(200)) ** 2
    grid = (-1.0, -0.5, 0.0, 0.5, 1.0)
    base = make_dataset(x, y)
    scaled = make_dataset(x, 7.5 * y)
    ll_base = [boxcox_profile_loglik(lam, base, (0,)) for lam in grid]
    ll_scaled = [boxcox_profile_loglik(lam, scaled, (0,)) for lam in grid]
    assert int(np.argmax(ll_base)) == int(np.argmax(ll_scaled))


def test_transformed_fit_carries_lambda_into_predictive():
    from dataclasses import replace

    rng = np.random.default_rng(8)
    x = rng.uniform(size=(30, 1))
    y = np.exp(x[:, 0] + 0.2 * rng.standard_normal(30))
    data = make_dataset(x, y)
    fit = ols_fit(data, columns=(0,), response=transform(y, 0.5))
    assert fit.lam is None
    pred_plain = predict_dist(fit, [0.5])
    assert pred_plain.kind is PredictionKind.T
    tagged = replace(fit, lam=0.5)
    pred = predict_dist(tagged, [0.5])
    assert pred.kind is PredictionKind.TRANSFORMED_T
    assert pred.lam == 0.5
    assert pred.loc == pytest.approx(pred_plain.loc)
    assert pred.scale == pytest.approx(pred_plain.scale)


@settings(max_examples=200)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_ols_matches_lstsq_and_orthogonality(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 21))
    p = int(rng.integers(1, min(5, n - 2) + 1))
    design = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    data = make_dataset(design, y)
    fit = ols_fit(data, columns=tuple(range(p)))
    x = np.column_stack([np.ones(n), design])
    beta_ref, *_ = np.linalg.lstsq(x, y, rcond=None)
    np.testing.assert_allclose(fit.coefficients, beta_ref, atol=1e-8)
    resid = y - x @ fit.coefficients
    # normal equations: residuals orthogonal to every design column
    assert np.abs(x.T @ resid).max() < 1e-8
