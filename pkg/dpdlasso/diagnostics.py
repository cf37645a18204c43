'''
Influence functions at the normal linear model, and robust summaries of
prediction residuals.
'''
from dataclasses import dataclass, replace
from typing import Literal, NamedTuple, Optional, Sequence

import numpy as np

from .datamodel import Dataset, FitConfig, FittedModel, Initializer, standardize
from .exceptions import DegenerateMad, EmptyAfterTrim, InvalidSampleSize, ZeroTrueCoefficient
from .logging import logger
from .mmfit import estimate
from .utils import mad_sigma

TAU_LOCATION_C = 4.5
TAU_SCALE_C = 3.0


@dataclass(frozen=True)
class IfContext:
    '''
    Model quantities the influence functions are evaluated at.

    `beta_true` is the full coefficient vector; the functions act on its
    support. `if_initial=None` means the initial estimator is the unpenalized
    DPD estimator, whose influence is computed at each contamination point.
    '''
    beta_true: np.ndarray
    sigma_true: float
    gamma: float
    exx_inv: np.ndarray
    support: tuple
    if_initial: Optional[np.ndarray] = None

    def __post_init__(self):
        beta = np.array(self.beta_true, dtype=float)
        support = tuple(int(j) for j in self.support)
        if (beta[list(support)] == 0).any():
            raise ZeroTrueCoefficient('Every support coordinate of the model coefficients must be nonzero')
        exx_inv = np.array(self.exx_inv, dtype=float)
        if exx_inv.shape != (len(support), len(support)) or not np.allclose(exx_inv, exx_inv.T):
            raise ValueError('exx_inv must be a symmetric s x s matrix')
        if not self.sigma_true > 0 or not self.gamma >= 0:
            raise ValueError('Need sigma_true > 0 and gamma >= 0')
        object.__setattr__(self, 'beta_true', beta)
        object.__setattr__(self, 'support', support)
        object.__setattr__(self, 'exx_inv', exx_inv)
        if self.if_initial is not None:
            object.__setattr__(self, 'if_initial', np.array(self.if_initial, dtype=float))

    @classmethod
    def at_model(cls, beta, sigma: float, gamma: float, X, support: Optional[Sequence[int]] = None,
                 if_initial=None) -> 'IfContext':
        '''E_H[x x'] over the support is estimated by the sample second moment of X.'''
        beta = np.asarray(beta, dtype=float)
        X = np.asarray(X, dtype=float)
        if support is None:
            support = np.flatnonzero(beta)
        support = [int(j) for j in support]
        if (beta[support] == 0).any():
            raise ZeroTrueCoefficient('Every support coordinate of the model coefficients must be nonzero')
        xs = X[:, support]
        exx = xs.T @ xs / X.shape[0]
        return cls(beta, sigma, gamma, np.linalg.inv(exx), tuple(support), if_initial)

    @property
    def p0_diag(self) -> np.ndarray:
        return self.beta_true[list(self.support)] ** -2.0

    def unpenalized_if(self, y_t: float, x_t) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=float)
        r = y_t - x_t @ self.beta_true
        e = np.exp(-0.5 * self.gamma * (r / self.sigma_true) ** 2)
        return (self.gamma + 1) ** 1.5 * self.exx_inv @ (r * e * x_t[list(self.support)])


def if_beta1(ctx: IfContext, y_t: float, x_t, lam: float) -> np.ndarray:
    '''
    Influence of a contamination point (y_t, x_t) on the support block of
    the penalized estimator. The zero block has identically zero influence.
    '''
    gamma, sigma = ctx.gamma, ctx.sigma_true
    x_t = np.asarray(x_t, dtype=float)
    r = (y_t - x_t @ ctx.beta_true) / sigma
    x1 = x_t[list(ctx.support)]
    u = ctx.unpenalized_if(y_t, x_t) if ctx.if_initial is None else ctx.if_initial
    bracket = (
        r * np.exp(-0.5 * gamma * r ** 2) * x1
        + lam * sigma ** (2 * gamma + 3) * (2 * np.pi) ** (gamma / 2) / (1 + gamma) * ctx.p0_diag * u
    )
    return (gamma + 1) ** 1.5 * sigma * ctx.exx_inv @ bracket


def if_sigma(sigma: float, gamma: float, y_t: float, x_t, beta,
             centering: Literal['printed', 'fisher'] = 'printed') -> float:
    '''
    Influence of (y_t, x_t) on the scale. `centering='fisher'` uses the
    constant gamma/(1+gamma)^(3/2), which makes the influence mean-zero
    under the model.
    '''
    r = (y_t - np.asarray(x_t, dtype=float) @ np.asarray(beta, dtype=float)) / sigma
    if centering == 'printed':
        shift = gamma / np.sqrt(1 + gamma)
    elif centering == 'fisher':
        shift = gamma / (1 + gamma) ** 1.5
    else:
        raise ValueError(f'Unknown centering: {centering}')
    factor = sigma * (1 + gamma) ** 2.5 / (2 + gamma ** 2)
    return float(factor * ((1 - r ** 2) * np.exp(-0.5 * gamma * r ** 2) - shift))


def numeric_if_check(ds_clean: Dataset, cfg: FitConfig, contamination, eps: float = 1e-3) -> np.ndarray:
    '''
    Finite-contamination proxy of the coefficient influence function on the
    raw scale: the point is replicated ceil(eps * n) times and the refit is
    warm-started from the clean fit.
    '''
    y_t, x_t = contamination
    x_t = np.asarray(x_t, dtype=float)
    clean = estimate(ds_clean, cfg)

    n = ds_clean.n
    m = int(np.ceil(eps * n))
    y_raw, X_raw = ds_clean.raw()
    ds_c = standardize(np.append(y_raw, np.full(m, float(y_t))), np.vstack([X_raw, np.tile(x_t, (m, 1))]),
                       ds_clean.column_names)

    start = replace(
        cfg,
        initializer=Initializer.PROVIDED,
        initial_beta=tuple(clean.beta * ds_c.column_scales),
        initial_sigma=clean.sigma,
        initial_intercept=clean.intercept + float(clean.beta @ ds_c.column_means) - ds_c.y_mean,
    )
    contaminated = estimate(ds_c, start)
    weight = m / (n + m)
    logger.debug(f'Numeric influence with {m} replicated rows (effective eps {weight:.3e})')
    return (contaminated.beta - clean.beta) / weight


def tau_scale(residuals) -> float:
    '''
    tau-scale with c1 = 4.5 (weighted location) and c2 = 3 (bounded rho),
    on the normal-consistent MAD.
    '''
    x = np.asarray(residuals, dtype=float)
    if x.shape[0] < 2:
        raise InvalidSampleSize('tau-scale needs at least two residuals')
    sigma0 = mad_sigma(x)
    if sigma0 == 0:
        raise DegenerateMad('Median absolute deviation of the residuals is zero')
    u = (x - np.median(x)) / sigma0
    w = np.where(np.abs(u) <= TAU_LOCATION_C, (1 - (u / TAU_LOCATION_C) ** 2) ** 2, 0.0)
    mu = np.sum(x * w) / np.sum(w)
    return float(sigma0 ** 2 / x.shape[0] * np.sum(np.minimum(((x - mu) / sigma0) ** 2, TAU_SCALE_C ** 2)))


def trimmed_rmse(residuals, keep: float = 0.9) -> float:
    if not 0 < keep <= 1:
        raise ValueError(f'keep must be in (0, 1], got {keep}')
    magnitude = np.sort(np.abs(np.asarray(residuals, dtype=float)))
    k = int(np.floor(keep * magnitude.shape[0] + 1e-9))
    if k == 0:
        raise EmptyAfterTrim(f'Keeping {keep} of {magnitude.shape[0]} residuals leaves nothing')
    return float(np.sqrt(np.mean(magnitude[:k] ** 2)))


class PredictionErrors(NamedTuple):
    ms: int
    rmse_trimmed: float
    max: float
    min: float
    tau: float


def prediction_errors(model: FittedModel, y_test, X_test, keep: float = 0.9) -> PredictionErrors:
    '''Model size and robust error summaries of test-set prediction residuals.'''
    r = np.asarray(y_test, dtype=float) - model.predict(X_test)
    magnitude = np.abs(r)
    return PredictionErrors(
        ms=model.ms,
        rmse_trimmed=trimmed_rmse(r, keep),
        max=float(magnitude.max()),
        min=float(magnitude.min()),
        tau=tau_scale(r),
    )
