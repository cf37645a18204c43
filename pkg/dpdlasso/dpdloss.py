'''
Density power divergence loss for the linear model with normal errors.

    L(b, s) = (2 pi)^(-g/2) s^(-g) [ (g+1)^(-1/2) - (g+1)/g * S ] + 1/g
    S       = mean_i exp(-(g/2) (r_i / s)^2)

The 1/g terms are combined through expm1 so small g does not cancel
catastrophically; g = 0 is the Gaussian negative log-likelihood.
'''
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, GammaZero, NonPositiveSigma

LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class LossKernel:
    '''
    Error-density hooks of the loss. Only the standard normal is shipped.
    '''
    gamma: float
    mf_gamma: float = field(init=False)

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f'gamma must be >= 0, got {self.gamma}')
        object.__setattr__(self, 'mf_gamma', float(np.exp(-0.5 * self.gamma * LOG_2PI) / np.sqrt(1 + self.gamma)))

    @staticmethod
    def density(s):
        return np.exp(-0.5 * np.square(s) - 0.5 * LOG_2PI)

    @staticmethod
    def score(s):
        # u(s) = f'(s) / f(s)
        return -np.asarray(s, dtype=float)

    def density_pow(self, s):
        '''f(s)^gamma, evaluated in log space.'''
        return np.exp(-0.5 * self.gamma * (np.square(s) + LOG_2PI))


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and sigma > 0):
        raise NonPositiveSigma(f'sigma must be finite and positive, got {sigma}')


def residuals(ds, beta, intercept: float = 0.0) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (ds.p,):
        raise DimensionMismatch(f'beta has shape {beta.shape}, dataset has p={ds.p}')
    return ds.y - ds.X @ beta - intercept


def log_mean_exp_weight(r, sigma: float, gamma: float) -> float:
    '''log S = log mean_i exp(-(gamma/2)(r_i/sigma)^2), accurate as gamma -> 0.'''
    a = -0.5 * gamma * np.square(np.asarray(r) / sigma)
    top = a.max()
    return float(top + np.log1p(np.mean(np.expm1(a - top))))


def dpd_loss_from_residuals(r, sigma: float, gamma: float) -> float:
    _check_sigma(sigma)
    if not gamma >= 0:
        raise ValueError(f'gamma must be >= 0, got {gamma}')
    r = np.asarray(r, dtype=float)
    log_sigma = np.log(sigma)
    if gamma == 0:
        return float(np.mean(np.square(r)) / (2 * sigma ** 2) + log_sigma + 0.5 * LOG_2PI)

    log_a = -gamma * (0.5 * LOG_2PI + log_sigma)
    z = log_a + np.log1p(gamma) + log_mean_exp_weight(r, sigma, gamma)
    return float(np.exp(log_a) / np.sqrt(gamma + 1) - np.expm1(z) / gamma)


def dpd_loss(ds, beta, sigma: float, gamma: float, intercept: float = 0.0) -> float:
    return dpd_loss_from_residuals(residuals(ds, beta, intercept), sigma, gamma)


def dpd_loss_alternative_from_residuals(r, sigma: float, gamma: float) -> float:
    _check_sigma(sigma)
    if gamma == 0:
        raise GammaZero('The log-transformed loss is undefined at gamma = 0')
    return -log_mean_exp_weight(r, sigma, gamma)


def dpd_loss_alternative(ds, beta, sigma: float, gamma: float, intercept: float = 0.0) -> float:
    return dpd_loss_alternative_from_residuals(residuals(ds, beta, intercept), sigma, gamma)


def psi1(s, gamma: float):
    kernel = LossKernel(gamma)
    s = np.asarray(s, dtype=float)
    return kernel.score(s) * kernel.density_pow(s)


def psi2(s, gamma: float):
    kernel = LossKernel(gamma)
    s = np.asarray(s, dtype=float)
    return (s * kernel.score(s) + 1) * kernel.density_pow(s) - gamma / (gamma + 1) * kernel.mf_gamma


def loss_gradient_beta(ds, beta, sigma: float, gamma: float, intercept: float = 0.0) -> np.ndarray:
    _check_sigma(sigma)
    r = residuals(ds, beta, intercept)
    e = np.exp(-0.5 * gamma * np.square(r / sigma))
    scale = np.exp(-gamma * (0.5 * LOG_2PI + np.log(sigma))) * (gamma + 1) / (ds.n * sigma ** 2)
    return -scale * (ds.X.T @ (e * r))
