import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adsmooth.dgp import DgpConfig, gen_panel
from adsmooth.errors import DegenerateInputError, ValidationError
from adsmooth.estimators import (
    LassoConfig,
    WeightedSample,
    fit_individual,
    lambda_rule,
    lasso_kkt_violation,
    lasso_objective,
    null_lambda,
    plugin_lambda,
    refit_sigma,
    soft_threshold,
    weighted_lasso,
    weighted_ols,
)
from adsmooth.panel import PanelDataset


def random_sample(seed, n=30, k=4, weighted=True):
    rng = np.random.default_rng(seed)
    x = np.hstack([np.ones((n, 1)), rng.standard_normal((n, k - 1))])
    y = x @ rng.standard_normal(k) + rng.standard_normal(n)
    w = rng.uniform(0.1, 2.0, n) if weighted else np.ones(n)
    return WeightedSample(x, y, w)


# weighted sample -------------------------------------------------------------

def test_sample_rejects_bad_weights():
    x = np.ones((3, 1))
    with pytest.raises(DegenerateInputError):
        WeightedSample(x, np.zeros(3), np.zeros(3))
    with pytest.raises(ValidationError):
        WeightedSample(x, np.zeros(3), np.array([1.0, -1.0, 1.0]))
    with pytest.raises(ValidationError):
        WeightedSample(x, np.array([0.0, np.nan, 1.0]), np.ones(3))
    with pytest.raises(ValidationError):
        WeightedSample(x, np.zeros(2), np.ones(3))


# weighted OLS ----------------------------------------------------------------

def test_ols_exact_recovery():
    rng = np.random.default_rng(1)
    x = np.hstack([np.ones((20, 1)), rng.standard_normal((20, 3))])
    beta = np.array([1.0, -2.0, 0.5, 3.0])
    np.testing.assert_allclose(weighted_ols(WeightedSample.unit(x, x @ beta)), beta, atol=1e-10)


def test_ols_duplicated_rows_weighted_mean():
    x = np.ones((2, 1))
    got = weighted_ols(WeightedSample(x, np.array([1.0, 4.0]), np.array([0.25, 0.75])))
    assert got[0] == pytest.approx((0.25 * 1 + 0.75 * 4) / 1.0)


def test_ols_minimum_norm_underdetermined():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((3, 6))
    y = rng.standard_normal(3)
    beta = weighted_ols(WeightedSample.unit(x, y))
    np.testing.assert_allclose(x @ beta, y, atol=1e-10)
    null = np.linalg.svd(x)[2][-1]
    for scale in (0.1, 1.0, -3.0):
        alt = beta + scale * null
        np.testing.assert_allclose(x @ alt, y, atol=1e-9)
        assert np.linalg.norm(beta) <= np.linalg.norm(alt) + 1e-12


def test_ols_weight_scale_invariant():
    s = random_sample(3)
    scaled = WeightedSample(s.rows, s.targets, 17.0 * s.obs_weights)
    np.testing.assert_allclose(weighted_ols(s), weighted_ols(scaled), atol=1e-10)


def test_ols_integer_weights_equal_replication():
    rng = np.random.default_rng(4)
    x = np.hstack([np.ones((8, 1)), rng.standard_normal((8, 2))])
    y = rng.standard_normal(8)
    w = rng.integers(1, 4, 8)
    rep = np.repeat(np.arange(8), w)
    np.testing.assert_allclose(
        weighted_ols(WeightedSample(x, y, w.astype(float))),
        weighted_ols(WeightedSample.unit(x[rep], y[rep])),
        atol=1e-10,
    )


def test_ols_zero_weight_rows_ignored():
    s = random_sample(5)
    w = s.obs_weights.copy()
    w[:5] = 0.0
    rows = s.rows.copy()
    rows[:5] = 1e6
    a = weighted_ols(WeightedSample(rows, s.targets, w))
    b = weighted_ols(WeightedSample(s.rows[5:], s.targets[5:], w[5:]))
    np.testing.assert_allclose(a, b, atol=1e-8)


# soft threshold --------------------------------------------------------------

def test_soft_threshold_examples():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    with pytest.raises(ValidationError):
        soft_threshold(1.0, -0.1)


@given(st.floats(-1e6, 1e6))
def test_soft_threshold_zero_is_identity(z):
    assert soft_threshold(z, 0.0) == z


# weighted Lasso --------------------------------------------------------------

CFG = LassoConfig(tol=1e-12, max_sweeps=100000)


@pytest.mark.parametrize("seed", range(50))
def test_lasso_zero_penalty_equals_ols(seed):
    s = random_sample(seed, n=25, k=5)
    fit = weighted_lasso(s, CFG, 0.0)
    assert fit.converged
    np.testing.assert_allclose(fit.coef, weighted_ols(s), atol=1e-6)


@pytest.mark.parametrize("lam", [0.05, 0.3, 1.0])
def test_lasso_orthogonal_design_soft_thresholds(lam):
    t = 16
    q, _ = np.linalg.qr(np.random.default_rng(6).standard_normal((t, 4)))
    x = q * math.sqrt(t)  # unit mean square, zero cross-products
    y = x @ np.array([1.5, -0.4, 0.2, 0.0]) + 0.3 * np.random.default_rng(7).standard_normal(t)
    s = WeightedSample.unit(x, y)
    ols = weighted_ols(s)
    fit = weighted_lasso(s, CFG, lam)
    np.testing.assert_allclose(fit.coef, [soft_threshold(b, lam) for b in ols], atol=1e-8)


def test_lasso_null_lambda_gives_zero():
    s = random_sample(8)
    lam0 = null_lambda(s)
    assert np.all(weighted_lasso(s, CFG, lam0).coef == 0.0)
    assert np.all(weighted_lasso(s, CFG, 2 * lam0).coef == 0.0)
    assert np.any(weighted_lasso(s, CFG, 0.9 * lam0).coef != 0.0)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("penalize_intercept", [True, False])
@pytest.mark.parametrize("standardize", [False, True])
def test_lasso_kkt_and_monotone_objective(seed, penalize_intercept, standardize):
    s = random_sample(100 + seed, n=40, k=6)
    cfg = LassoConfig(tol=1e-10, max_sweeps=100000, penalize_intercept=penalize_intercept, standardize=standardize)
    lam = 0.3 * null_lambda(s)
    fit = weighted_lasso(s, cfg, lam)
    assert fit.converged
    trace = fit.objective_trace
    assert np.all(np.diff(trace) <= 1e-12)
    if not standardize:
        assert lasso_kkt_violation(s, fit.coef, lam, penalize_intercept) < 1e-6
        assert trace[-1] == pytest.approx(
            lasso_objective(s, fit.coef, lam, penalize_intercept) + 0.0, abs=1e-9
        )


def test_lasso_standardized_solves_scaled_problem():
    s = random_sample(9, n=50, k=4)
    scale = np.array([1.0, 10.0, 0.1, 3.0])
    scaled = WeightedSample(s.rows * scale, s.targets, s.obs_weights)
    cfg = LassoConfig(tol=1e-12, max_sweeps=100000, standardize=True)
    a = weighted_lasso(s, cfg, 0.1).coef
    b = weighted_lasso(scaled, cfg, 0.1).coef
    np.testing.assert_allclose(a, b * scale, atol=1e-8)


def test_lasso_weight_scale_invariant():
    s = random_sample(10)
    scaled = WeightedSample(s.rows, s.targets, 9.0 * s.obs_weights)
    np.testing.assert_allclose(weighted_lasso(s, CFG, 0.1).coef, weighted_lasso(scaled, CFG, 0.1).coef, atol=1e-9)


def test_lasso_nonconvergence_is_flagged():
    s = random_sample(11, n=30, k=8)
    fit = weighted_lasso(s, LassoConfig(max_sweeps=1, tol=1e-14), 0.01)
    assert not fit.converged and fit.sweeps == 1


def test_lasso_rejects_bad_penalty():
    with pytest.raises(ValidationError):
        weighted_lasso(random_sample(0), CFG, -1.0)
    with pytest.raises(ValidationError):
        LassoConfig(penalty="cv")


# penalty rule ----------------------------------------------------------------

def test_lambda_rule_scaling():
    base = lambda_rule(1.0, 5, 20.0)
    assert lambda_rule(2.0, 5, 20.0) == pytest.approx(2 * base)
    assert lambda_rule(1.0, 5, 80.0) == pytest.approx(base / 2)
    assert lambda_rule(1.0, 6, 20.0) > base
    assert base == pytest.approx(1.1 * math.sqrt(2 * math.log(6) / 20))
    with pytest.raises(ValidationError):
        lambda_rule(1.0, 0, 20.0)
    with pytest.raises(ValidationError):
        lambda_rule(1.0, 3, 0.0)


def test_plugin_lambda_scales_with_noise():
    s = random_sample(12, n=200, k=6, weighted=False)
    s2 = WeightedSample(s.rows, 2 * s.targets, s.obs_weights)
    cfg = LassoConfig()
    assert plugin_lambda(s2, cfg, "first", 200) == pytest.approx(2 * plugin_lambda(s, cfg, "first", 200), rel=1e-6)
    with pytest.raises(ValidationError):
        plugin_lambda(s, cfg, "third", 200)
    with pytest.raises(ValidationError):
        plugin_lambda(WeightedSample.unit(np.ones((5, 1)), np.arange(5.0)), cfg, "first", 5)


def test_refit_sigma_close_to_noise_level():
    rng = np.random.default_rng(13)
    x = np.hstack([np.ones((2000, 1)), rng.standard_normal((2000, 5))])
    y = x @ np.array([1.0, 2.0, 0, 0, 0, 0]) + 0.7 * rng.standard_normal(2000)
    s = WeightedSample.unit(x, y)
    assert refit_sigma(s, np.array([1.0, 2.0, 0, 0, 0, 0]), 2000) == pytest.approx(0.7, rel=0.05)


# per-individual fits ---------------------------------------------------------

def test_fit_individual_ols_exact():
    cfg = DgpConfig(dgp=2, n=3, t=12, p=5, noise_sd=0.0, seed=3)
    train, _, truth = gen_panel(cfg)
    for i in range(3):
        np.testing.assert_allclose(fit_individual(train, i, "ols"), truth[i], atol=1e-10)
    with pytest.raises(IndexError):
        fit_individual(train, 3, "ols")
    with pytest.raises(ValidationError):
        fit_individual(train, 0, "ridge")


def test_fit_individual_lasso_recovers_support():
    cfg = DgpConfig(dgp=3, n=1, t=500, p=15, s=5, seed=2024)
    train, _, truth = gen_panel(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        beta = fit_individual(train, 0, "lasso")
    true = truth[0]
    support = np.flatnonzero(true != 0)
    assert np.all(beta[support] != 0)
    big = np.abs(true) > 0.5
    assert np.all(np.sign(beta[big]) == np.sign(true[big]))
