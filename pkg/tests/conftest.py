import numpy as np
import pytest

from dpdlasso.datamodel import Dataset, FittedModel, standardize


def sparse_data(seed, n=60, p=8, sigma=0.5, beta=None, rho=0.0):
    '''Gaussian design with a (3, 1.5, 0, 0, 2, 0, ...) coefficient vector.'''
    rng = np.random.default_rng(seed)
    if beta is None:
        beta = np.zeros(p)
        beta[:5] = (3.0, 1.5, 0.0, 0.0, 2.0)[:min(5, p)]
    X = rng.standard_normal((n, p))
    if rho:
        for j in range(1, p):
            X[:, j] = rho * X[:, j - 1] + np.sqrt(1 - rho ** 2) * X[:, j]
    y = X @ beta + sigma * rng.standard_normal(n)
    return y, X, np.asarray(beta, dtype=float)


def residual_dataset(r):
    '''A dataset whose residuals at beta = 0 are exactly r.'''
    r = np.asarray(r, dtype=float)
    return Dataset.unscaled(r, np.zeros((r.shape[0], 1)))


def make_model(beta, sigma=0.5, intercept=0.0, gamma=0.5, lam=0.1, support=None):
    beta = np.asarray(beta, dtype=float)
    if support is None:
        support = np.flatnonzero(beta)
    return FittedModel(beta=beta, beta_std=beta, sigma=sigma, intercept=intercept, intercept_std=intercept,
                       support=support, objective_trace=[1.0], converged=True, n_outer_iter=1,
                       gamma=gamma, lam=lam)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def clean_ds():
    y, X, _ = sparse_data(7)
    return standardize(y, X)
