"""Stream derivation and scenario data generation."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from splitscore.boxcox import transform, inverse
from splitscore.randgen import (
    Dataset,
    Purpose,
    ResponseKind,
    Scenario,
    ScenarioParams,
    StreamKey,
    correlated_uniform_design,
    derive_seed,
    generate,
    make_stream,
    uniform_corr_to_normal,
)

RHO_NORMAL_AT_95 = 0.9543175205192167  # 2 sin(pi * 0.95 / 6)


def test_stream_key_rejects_negative_ids():
    with pytest.raises(ValueError):
        StreamKey(master_seed=-1, replication_id=0, purpose=Purpose.TRAIN_DATA)
    with pytest.raises(ValueError):
        StreamKey(master_seed=1, replication_id=-2, purpose=Purpose.EVAL_DATA)


def test_same_key_same_stream():
    key = StreamKey(1729, 41, Purpose.TRAIN_DATA)
    a = make_stream(key).standard_normal(16)
    b = make_stream(key).standard_normal(16)
    assert np.array_equal(a, b)


def test_purposes_give_disjoint_streams():
    draws = {}
    for purpose in Purpose:
        stream = make_stream(StreamKey(1729, 3, purpose))
        draws[purpose] = stream.standard_normal(8)
    values = list(draws.values())
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            assert not np.allclose(values[i], values[j])


def test_derive_seed_is_deterministic_and_sensitive():
    a = derive_seed(1729, "boxcox", "sigma=1,beta=0,n=18,lam=0")
    b = derive_seed(1729, "boxcox", "sigma=1,beta=0,n=18,lam=0")
    c = derive_seed(1729, "boxcox", "sigma=1,beta=0,n=18,lam=0.5")
    assert a == b
    assert a != c
    assert 0 <= a < 2**64


def test_copula_transform_constant():
    assert uniform_corr_to_normal(0.95) == pytest.approx(RHO_NORMAL_AT_95, abs=1e-12)
    assert uniform_corr_to_normal(0.0) == 0.0
    assert uniform_corr_to_normal(1.0) == pytest.approx(1.0, abs=1e-12)


def test_copula_achieves_target_uniform_correlation():
    stream = np.random.default_rng(7)
    x = correlated_uniform_design(200_000, 2, 0.95, stream)
    r = np.corrcoef(x[:, 0], x[:, 1])[0, 1]
    assert abs(r - 0.95) < 0.01
    # marginals stay uniform
    assert abs(x.mean() - 0.5) < 0.005
    assert abs(x.var() - 1.0 / 12.0) < 0.005
    ks = stats.kstest(x[:, 0], "uniform")
    assert ks.pvalue > 1e-4


def test_copula_zero_correlation_is_independent_path():
    stream = np.random.default_rng(8)
    x = correlated_uniform_design(100_000, 3, 0.0, stream)
    c = np.corrcoef(x, rowvar=False)
    off = c[~np.eye(3, dtype=bool)]
    assert np.abs(off).max() < 0.02


def test_scenario_params_validation():
    with pytest.raises(ValueError):
        ScenarioParams(scenario=Scenario.BOXCOX, n=18, beta=1.0, sigma=1.0)  # no lam
    with pytest.raises(ValueError):
        ScenarioParams(scenario=Scenario.OUTLIER, n=18, beta=1.0, sigma=1.0, df=2.0)
    with pytest.raises(ValueError):
        ScenarioParams(scenario=Scenario.VARSEL, n=60, beta=1.0, sigma=-1.0, p=5, rho=0.0)


def test_boxcox_generation_positive_and_invertible():
    params = ScenarioParams(
        scenario=Scenario.BOXCOX, n=200, beta=1.0, sigma=1.0, lam=0.5
    )
    data = generate(params, make_stream(StreamKey(1729, 0, Purpose.TRAIN_DATA)))
    assert data.n == 200
    assert (data.response > 0).all()
    # the generated response is the exact inverse image of a valid working value
    t = transform(data.response, 0.5)
    back = inverse(t, 0.5)
    np.testing.assert_allclose(back, data.response, rtol=1e-12)


def test_boxcox_log_case_never_rejects():
    params = ScenarioParams(
        scenario=Scenario.BOXCOX, n=500, beta=1.0, sigma=10.0, lam=0.0
    )
    data = generate(params, make_stream(StreamKey(11, 0, Purpose.TRAIN_DATA)))
    assert data.n_rejected == 0
    assert (data.response > 0).all()


def test_boxcox_negative_lambda_rejects_and_counts():
    # lam=-0.5 with sigma=10 pushes many draws outside the invertible region
    params = ScenarioParams(
        scenario=Scenario.BOXCOX, n=500, beta=0.0, sigma=10.0, lam=-0.5
    )
    data = generate(params, make_stream(StreamKey(12, 0, Purpose.TRAIN_DATA)))
    assert data.n_rejected > 0
    assert (data.response > 0).all()
    assert np.isfinite(data.response).all()


def test_varsel_generation_mean_structure():
    params = ScenarioParams(
        scenario=Scenario.VARSEL, n=300, beta=1.0, sigma=1e-6, p=5, rho=0.0
    )
    data = generate(params, make_stream(StreamKey(13, 0, Purpose.TRAIN_DATA)))
    np.testing.assert_allclose(data.response, data.design.sum(axis=1), atol=1e-4)


def test_outlier_noise_scale():
    base = dict(scenario=Scenario.OUTLIER, n=18, beta=0.0, sigma=2.0)
    inf_params = ScenarioParams(df=np.inf, **base)
    t3_params = ScenarioParams(df=3.0, **base)
    stream = StreamKey(14, 0, Purpose.TRAIN_DATA)
    y_inf = generate(inf_params, make_stream(stream), n_override=200_000).response
    y_t3 = generate(t3_params, make_stream(stream), n_override=200_000).response
    assert abs(y_inf.std() - 2.0) < 0.02
    # t3 variance is d/(d-2) = 3 times the scale squared
    assert abs(y_t3.std() - 2.0 * np.sqrt(3.0)) < 0.15


def test_binary_generation_matches_marginal_rate():
    params = ScenarioParams(
        scenario=Scenario.BINARY, n=100, beta=1.0, sigma=1.0, p=3, rho=0.0
    )
    data = generate(params, make_stream(StreamKey(15, 0, Purpose.TRAIN_DATA)), n_override=100_000)
    assert data.response_kind is ResponseKind.BINARY
    assert set(np.unique(data.response)) <= {0.0, 1.0}
    # marginal P(Y=1) by independent monte carlo of expit(sum x + eps)
    rng = np.random.default_rng(99)
    x = rng.uniform(size=(200_000, 3)).sum(axis=1)
    eta = x + rng.standard_normal(200_000)
    target = (1.0 / (1.0 + np.exp(-eta))).mean()
    assert abs(data.response.mean() - target) < 0.01


def test_dataset_subset_keeps_kind():
    data = Dataset(
        design=np.arange(8.0).reshape(4, 2),
        response=np.array([0.0, 1.0, 1.0, 0.0]),
        response_kind=ResponseKind.BINARY,
    )
    sub = data.subset([2, 0])
    assert sub.n == 2
    assert sub.response_kind is ResponseKind.BINARY
    np.testing.assert_array_equal(sub.design, [[4.0, 5.0], [0.0, 1.0]])
    np.testing.assert_array_equal(sub.response, [1.0, 0.0])


@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=0, max_value=10_000))
def test_stream_determinism_property(seed, rep):
    key = StreamKey(seed, rep, Purpose.EVAL_DATA)
    assert np.array_equal(
        make_stream(key).integers(0, 2**31, size=4),
        make_stream(key).integers(0, 2**31, size=4),
    )
