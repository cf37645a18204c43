from dataclasses import replace

import numpy as np
import pytest

from dpdlasso.datamodel import Dataset, FitConfig, Initializer, coefficients_to_raw, standardize
from dpdlasso.dpdloss import dpd_loss, loss_gradient_beta
from dpdlasso.exceptions import DegenerateScale, DimensionMismatch
from dpdlasso.mmfit import (MmState, anchor_weights, compute_mm_weights, estimate, fit, initialize, leverage_weights,
                            null_lambda_max, null_point, objective, surrogate_scale, transform_data, update_beta,
                            update_sigma)
from dpdlasso.weights import WeightScheme
from dpdlasso.wlasso import WlsProblem, solve_weighted_lasso

from conftest import residual_dataset, sparse_data


def state_at(ds, beta, sigma, gamma, intercept=0.0, weights=None):
    beta = np.asarray(beta, dtype=float)
    weights = np.ones(ds.p) if weights is None else weights
    mu = compute_mm_weights(ds, beta, sigma, gamma, intercept)
    return MmState(beta, sigma, beta, mu, objective(ds, beta, sigma, gamma, 0.0, weights, intercept), 1, intercept,
                   weights)


def with_y_outliers(y, rng, frac=0.1, mean=20.0):
    y = y.copy()
    rows = rng.choice(y.shape[0], int(frac * y.shape[0]), replace=False)
    y[rows] += rng.normal(mean, 1.0, rows.shape[0])
    return y


def test_equal_residuals_give_uniform_weights():
    mu = compute_mm_weights(residual_dataset([0.3, 0.3, 0.3]), [0.0], 1.0, 0.7)
    np.testing.assert_array_equal(mu, np.full(3, 1 / 3))


def test_gross_residual_gets_no_weight():
    mu = compute_mm_weights(residual_dataset([0.0, 100.0]), [0.0], 1.0, 1.0)
    np.testing.assert_allclose(mu, [1.0, 0.0], atol=1e-12)


def test_weights_are_normalized_gaussian_kernel():
    mu = compute_mm_weights(residual_dataset([0.0, 1.0, 2.0]), [0.0], 1.0, 1.0)
    expected = np.exp([0.0, -0.5, -2.0])
    np.testing.assert_allclose(mu, expected / expected.sum(), atol=1e-12)
    assert mu.sum() == pytest.approx(1.0, abs=1e-15)


def test_transform_data_scaling(clean_ds):
    n = clean_ds.n
    y_star, X_star = transform_data(clean_ds, np.full(n, 1 / n), 1.0)
    np.testing.assert_allclose(y_star, clean_ds.y / np.sqrt(n), rtol=1e-14)
    np.testing.assert_allclose(X_star, clean_ds.X / np.sqrt(n), rtol=1e-14)

    mu = np.full(n, 1 / (n - 1))
    mu[4] = 0.0
    y_star, X_star = transform_data(clean_ds, mu, 0.8)
    assert y_star[4] == 0.0
    np.testing.assert_array_equal(X_star[4], 0.0)


def test_surrogate_identity(clean_ds, rng):
    mu = rng.dirichlet(np.ones(clean_ds.n))
    sigma = 0.7
    y_star, X_star = transform_data(clean_ds, mu, sigma)
    for _ in range(20):
        beta = rng.normal(size=clean_ds.p)
        lhs = np.sum((y_star - X_star @ beta) ** 2)
        rhs = np.sum(mu * (clean_ds.y - clean_ds.X @ beta) ** 2) / sigma
        assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize('gamma', [0.1, 0.5, 1.0])
def test_quadratic_bound_touches_the_loss(rng, gamma):
    y, X, _ = sparse_data(9, n=50, p=6)
    ds = standardize(with_y_outliers(y, rng), X)
    beta0, sigma = rng.normal(size=ds.p), 0.8
    mu = compute_mm_weights(ds, beta0, sigma, gamma)
    c = np.exp(surrogate_scale(ds, beta0, sigma, gamma))
    y_star, X_star = transform_data(ds, mu, sigma)
    rss0 = np.sum((y_star - X_star @ beta0) ** 2)

    def bound(beta):
        return dpd_loss(ds, beta0, sigma, gamma) + c * (np.sum((y_star - X_star @ beta) ** 2) - rss0)

    assert bound(beta0) == pytest.approx(dpd_loss(ds, beta0, sigma, gamma), abs=1e-12)
    gradient = -2 * c * X_star.T @ (y_star - X_star @ beta0)
    np.testing.assert_allclose(gradient, loss_gradient_beta(ds, beta0, sigma, gamma), rtol=1e-8, atol=1e-12)
    for scale in (1e-3, 0.1, 1.0, 10.0):
        for _ in range(10):
            beta = beta0 + scale * rng.normal(size=ds.p)
            assert bound(beta) >= dpd_loss(ds, beta, sigma, gamma) - 1e-12


def test_huge_lambda_zeroes_coefficients(clean_ds):
    cfg = FitConfig(gamma=0.5, lam=1e12)
    step = update_beta(state_at(clean_ds, np.ones(clean_ds.p), 1.0, 0.5), clean_ds, cfg, np.ones(clean_ds.p))
    np.testing.assert_array_equal(step.beta, 0.0)
    assert step.converged


def test_update_reduces_loss_on_exact_fit(rng):
    X = rng.normal(size=(30, 4))
    beta0 = np.array([1.0, -2.0, 0.0, 0.5])
    ds = Dataset.unscaled(X @ beta0, X)
    start = beta0 + 0.1
    cfg = FitConfig(gamma=0.5, lam=0.0)
    step = update_beta(state_at(ds, start, 0.5, 0.5), ds, cfg, np.ones(4))
    assert dpd_loss(ds, step.beta, 0.5, 0.5, step.intercept) < dpd_loss(ds, start, 0.5, 0.5)


@pytest.mark.parametrize('seed', range(50))
def test_coefficient_step_descends(seed):
    rng = np.random.default_rng(seed)
    y, X, _ = sparse_data(seed, n=40, p=6)
    ds = standardize(with_y_outliers(y, rng), X)
    gamma, sigma, lam = rng.uniform(0.1, 1.0), rng.uniform(0.3, 2.0), rng.uniform(0.001, 0.2)
    weights = rng.uniform(0.5, 2.0, ds.p)
    beta = rng.normal(size=ds.p)
    state = state_at(ds, beta, sigma, gamma, 0.0, weights)
    step = update_beta(state, ds, FitConfig(gamma=gamma, lam=lam), weights)
    before = objective(ds, beta, sigma, gamma, lam, weights, 0.0)
    after = objective(ds, step.beta, sigma, gamma, lam, weights, step.intercept)
    assert after <= before + 1e-10


def test_gaussian_scale_is_root_mean_square(clean_ds, rng):
    beta = rng.normal(size=clean_ds.p)
    r = clean_ds.y - clean_ds.X @ beta
    assert update_sigma(clean_ds, beta, 3.0, 0.0) == pytest.approx(np.sqrt(np.mean(r ** 2)), rel=1e-14)


def test_scale_update_with_flat_weights():
    gamma = 0.5
    sigma = update_sigma(residual_dataset([0.7, 0.7, 0.7, 0.7]), [0.0], 1e8, gamma)
    assert sigma ** 2 == pytest.approx(0.49 / (1 - gamma / (gamma + 1) ** 1.5), rel=1e-10)


def test_scale_update_degenerate():
    with pytest.raises(DegenerateScale):
        update_sigma(residual_dataset([100.0, -100.0, 100.0]), [0.0], 1.0, 0.5)


def test_scale_update_is_floored():
    assert update_sigma(residual_dataset([0.0, 0.0]), [0.0], 1.0, 0.0) == pytest.approx(1e-8)


def test_anchor_weights_follow_lambda_for_scad():
    scad = FitConfig(lam=0.5, weight_scheme=WeightScheme.scad())
    np.testing.assert_allclose(anchor_weights(scad, [0.1, 10.0]), [1.0, 0.0])
    pinned = replace(scad, scad_lambda=20.0)
    np.testing.assert_allclose(anchor_weights(pinned, [0.1, 10.0]), [1.0, 1.0])
    np.testing.assert_array_equal(anchor_weights(replace(scad, lam=0.0), [0.1, 10.0]), [1.0, 1.0])


def test_gaussian_limit_is_the_lasso():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y, X, _ = sparse_data(seed, n=50, p=10)
        ds = standardize(y, X)
        sigma, lam = 1.3, rng.uniform(0.05, 1.0)
        cfg = FitConfig(gamma=0.0, lam=lam, sigma_fixed=sigma, epsilon_inner=1e-12, max_inner_iter=100000)
        model = fit(ds, cfg, np.zeros(ds.p), sigma)
        lasso = solve_weighted_lasso(WlsProblem(ds.y, ds.X, 2 * ds.n * sigma ** 2 * lam, np.ones(ds.p)),
                                     1e-12, 100000)
        assert np.abs(model.beta_std - lasso.beta).max() < 1e-6
        assert model.sigma == sigma


@pytest.mark.parametrize('gamma', [0.1, 0.3, 0.5, 1.0])
@pytest.mark.parametrize('scheme', [WeightScheme.unit(), WeightScheme.hard_threshold(), WeightScheme.scad()])
@pytest.mark.parametrize('contaminated', [False, True])
def test_objective_trace_is_monotone(gamma, scheme, contaminated):
    rng = np.random.default_rng(11)
    y, X, _ = sparse_data(11, n=60, p=8)
    if contaminated:
        y = with_y_outliers(y, rng)
    ds = standardize(y, X)
    model = estimate(ds, FitConfig(gamma=gamma, lam=0.05, weight_scheme=scheme))
    assert model.objective_trace[0] >= model.objective_trace[-1]
    assert (np.diff(model.objective_trace) <= 1e-10).all()


def test_huge_lambda_fit_is_empty(clean_ds):
    model = estimate(clean_ds, FitConfig(gamma=0.5, lam=1e9))
    assert model.ms == 0
    np.testing.assert_array_equal(model.beta, 0.0)
    assert model.converged


def test_fit_rejects_wrong_start(clean_ds):
    with pytest.raises(DimensionMismatch):
        fit(clean_ds, FitConfig(), np.zeros(clean_ds.p + 1), 1.0)


def test_single_outlier_moves_only_the_gaussian_fit():
    y, X, _ = sparse_data(3, n=100, p=10)
    contaminated = y.copy()
    contaminated[17] += 1000.0

    def coefficients(gamma, response):
        cfg = FitConfig(gamma=gamma, lam=0.0, epsilon_outer=1e-10, max_outer_iter=500)
        return estimate(standardize(response, X), cfg).beta

    robust, robust_c = coefficients(0.5, y), coefficients(0.5, contaminated)
    assert np.linalg.norm(robust_c - robust) < 0.01 * np.linalg.norm(robust)
    gaussian, gaussian_c = coefficients(0.0, y), coefficients(0.0, contaminated)
    assert np.linalg.norm(gaussian_c - gaussian) > 0.5 * np.linalg.norm(gaussian)


@pytest.mark.parametrize('gamma', [0.1, 0.5])
def test_scale_solves_its_estimating_equation(gamma):
    y, X, _ = sparse_data(21, n=200, p=5)
    ds = standardize(y, X)
    cfg = FitConfig(gamma=gamma, lam=0.0, epsilon_outer=1e-14, epsilon_inner=1e-12, max_outer_iter=5000,
                    max_inner_iter=100000)
    model = estimate(ds, cfg)
    s = (ds.y - ds.X @ model.beta_std - model.intercept_std) / model.sigma
    w = np.exp(-0.5 * gamma * s ** 2)
    assert np.mean(w * (1 - s ** 2)) == pytest.approx(gamma / (gamma + 1) ** 1.5, abs=1e-5)


def test_provided_initializer_is_passed_through(clean_ds):
    cfg = FitConfig(initializer=Initializer.PROVIDED, initial_beta=np.arange(clean_ds.p), initial_sigma=0.3,
                    initial_intercept=0.2)
    init = initialize(clean_ds, cfg)
    np.testing.assert_array_equal(init.beta, np.arange(clean_ds.p))
    assert init.sigma == 0.3 and init.intercept == 0.2
    with pytest.raises(DimensionMismatch):
        initialize(clean_ds, replace(cfg, initial_beta=(1.0,)))


def test_robust_initializer_resists_response_outliers():
    rng = np.random.default_rng(5)
    y, X, _ = sparse_data(5, n=100, p=10)
    ds = standardize(with_y_outliers(y, rng), X)
    huber = initialize(ds, FitConfig(initializer=Initializer.HUBER_LASSO_IRLS))
    ols = initialize(ds, FitConfig(initializer=Initializer.OLS_LASSO))
    assert huber.sigma < 2 * 0.5
    assert ols.sigma > 5 * 0.5


def test_initializer_keeps_the_true_support():
    for seed in range(10):
        y, X, beta0 = sparse_data(seed, n=100, p=50, rho=0.5)
        init = initialize(standardize(y, X), FitConfig())
        assert set(np.flatnonzero(beta0)) <= set(np.flatnonzero(init.beta))


@pytest.mark.parametrize('scheme', [WeightScheme.unit(), WeightScheme.hard_threshold(), WeightScheme.scad()])
def test_fit_at_lambda_bound_is_empty(clean_ds, scheme):
    cfg = FitConfig(gamma=0.3, weight_scheme=scheme)
    init = initialize(clean_ds, cfg)
    top = null_lambda_max(clean_ds, cfg, init)
    model = fit(clean_ds, replace(cfg, lam=top), init.beta, init.sigma, init.intercept)
    assert model.ms == 0
    assert fit(clean_ds, replace(cfg, lam=1e-2 * top), init.beta, init.sigma, init.intercept).ms > 0


def test_fit_stops_when_the_scale_collapses():
    X = np.column_stack([np.linspace(-1.0, 1.0, 12), np.tile([1.0, -1.0, 0.5], 4)])
    beta0 = np.array([1.0, -2.0])
    y = X @ beta0
    y[[1, 4, 7, 10]] += 50.0
    cfg = FitConfig(gamma=1.0, lam=0.0, weight_scheme=WeightScheme.unit())
    model = fit(Dataset.unscaled(y, X), cfg, beta0, 1.0)
    assert not model.converged
    assert model.sigma == pytest.approx(1e-2, rel=1e-5)
    np.testing.assert_allclose(model.beta, beta0, atol=1e-6)
    assert (np.diff(model.objective_trace) <= 1e-10).all()


def test_leverage_points_get_small_row_weights(rng):
    X = rng.standard_normal((200, 5))
    X[:20] += 10.0
    w = leverage_weights(X)
    assert w[:20].max() < 0.01
    assert np.mean(w[20:] == 1.0) > 0.9
    assert (w > 0).all() and (w <= 1).all()


def test_robust_initializer_resists_leverage_points():
    y, X, beta0 = sparse_data(17, n=100, p=10)
    X = X.copy()
    X[:10] += 10.0
    ds = standardize(y, X)

    def error(initializer):
        init = initialize(ds, FitConfig(initializer=initializer))
        return np.linalg.norm(coefficients_to_raw(init.beta, init.intercept, ds)[0] - beta0)

    robust = error(Initializer.HUBER_LASSO_IRLS)
    assert robust < 0.5
    assert error(Initializer.OLS_LASSO) > 2 * robust


@pytest.mark.parametrize('scheme', [WeightScheme.unit(), WeightScheme.hard_threshold(), WeightScheme.scad()])
def test_estimate_keeps_the_better_start(scheme):
    rng = np.random.default_rng(31)
    y, X, _ = sparse_data(31, n=60, p=8)
    ds = standardize(with_y_outliers(y, rng), X)
    cfg = FitConfig(gamma=0.5, lam=0.02, weight_scheme=scheme)
    init = initialize(ds, cfg)
    start = null_point(ds, cfg, init)
    candidates = [
        fit(ds, cfg, init.beta, init.sigma, init.intercept, sigma_ref=init.sigma),
        fit(ds, cfg, np.zeros(ds.p), start.sigma, start.intercept, beta_tilde=init.beta, sigma_ref=init.sigma),
    ]
    chosen = estimate(ds, cfg)
    assert any(np.array_equal(chosen.beta_std, m.beta_std) for m in candidates)
    weights = anchor_weights(cfg, init.beta)

    def q(model):
        return objective(ds, model.beta_std, model.sigma, cfg.gamma, cfg.lam, weights, model.intercept_std)

    assert chosen.converged == any(m.converged for m in candidates)
    for model in candidates:
        if model.converged == chosen.converged:
            assert q(chosen) <= q(model)
