'''
Adaptively weighted DPD-LASSO by majorization-minimization.

Each outer iteration
  1. majorizes the loss around the current residuals by a weighted sum of
     squares (weights mu_i = softmax(-(gamma/2) r_i^2 / sigma^2)),
  2. solves the resulting weighted-l1 least-squares problem on the
     transformed data y* = sqrt(mu/sigma) y, X* = sqrt(mu/sigma) X,
  3. updates sigma,
  4. re-anchors the adaptive weights at the new coefficients.

The quadratic bound holds for the full objective Q = L + lam * sum w|b|:

    L(b) <= const + c * sum_i (y*_i - x*_i'b)^2,
    c = (gamma+1) S_m / (2 (2 pi)^(gamma/2) sigma^(gamma+1))

so the subproblem penalty is lam / c. At gamma = 0, c = 1/(2 sigma) and the
step is the ordinary LASSO with penalty 2 n sigma^2 lam. Every step is kept
only if Q does not increase, so objective_trace is monotone.
'''
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import softmax
from scipy.stats import chi2, median_abs_deviation

from .config import config
from .datamodel import Dataset, FitConfig, FittedModel, Initializer, coefficients_to_raw
from .dpdloss import LOG_2PI, dpd_loss_from_residuals, log_mean_exp_weight
from .exceptions import DegenerateScale, DimensionMismatch, NonPositiveSigma
from .logging import logger
from .utils import mad_sigma
from .weights import compute_weights, penalty, split_weights
from .wlasso import WlsProblem, lambda_max, solve_weighted_lasso


class InitialEstimate(NamedTuple):
    beta: np.ndarray
    sigma: float
    intercept: float = 0.0


class BetaUpdate(NamedTuple):
    beta: np.ndarray
    intercept: float
    converged: bool


@dataclass(frozen=True)
class MmState:
    beta_current: np.ndarray
    sigma_current: float
    beta_tilde: np.ndarray
    mu: np.ndarray
    q_value: float
    outer_iter: int = 0
    intercept_current: float = 0.0
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if abs(self.mu.sum() - 1) > 1e-10 or (self.mu < 0).any():
            raise ValueError('mu must be a probability vector')
        if not np.isfinite(self.q_value):
            raise ValueError(f'Objective value is not finite: {self.q_value}')


def _residuals(ds: Dataset, beta, intercept: float) -> np.ndarray:
    return ds.y - ds.X @ beta - intercept


def anchor_weights(cfg: FitConfig, beta_tilde) -> np.ndarray:
    '''Penalty weights at the anchor; SCAD's threshold follows lambda unless pinned.'''
    scheme = cfg.weight_scheme
    if scheme.kind == 'scad':
        lambda_n = cfg.scad_lambda if cfg.scad_lambda is not None else cfg.lam
        if lambda_n <= 0:
            return np.ones(len(beta_tilde))
        scheme = scheme.with_lambda(lambda_n)
    return compute_weights(scheme, beta_tilde)


def objective(ds: Dataset, beta, sigma: float, gamma: float, lam: float, weights, intercept: float = 0.0) -> float:
    r = _residuals(ds, beta, intercept)
    return dpd_loss_from_residuals(r, sigma, gamma) + penalty(lam, weights, beta)


def compute_mm_weights(ds: Dataset, beta, sigma: float, gamma: float, intercept: float = 0.0) -> np.ndarray:
    if not sigma > 0:
        raise NonPositiveSigma(f'sigma must be positive, got {sigma}')
    r = _residuals(ds, np.asarray(beta, dtype=float), intercept)
    mu = softmax(-0.5 * gamma * np.square(r / sigma))
    assert np.isfinite(mu).all() and mu.max() > 0
    return mu


def transform_data(ds: Dataset, mu, sigma: float):
    root = np.sqrt(np.asarray(mu) / sigma)
    return root * ds.y, root[:, None] * ds.X


def surrogate_scale(ds: Dataset, beta, sigma: float, gamma: float, intercept: float = 0.0) -> float:
    '''log c of the quadratic bound at the current point.'''
    log_s = log_mean_exp_weight(_residuals(ds, beta, intercept), sigma, gamma) if gamma > 0 else 0.0
    return float(np.log1p(gamma) + log_s - np.log(2) - 0.5 * gamma * LOG_2PI - (gamma + 1) * np.log(sigma))


def _augmented_problem(ds: Dataset, mu, sigma: float, lam_eff: float, weights, warm_start=None) -> WlsProblem:
    y_star, X_star = transform_data(ds, mu, sigma)
    root = np.sqrt(np.asarray(mu) / sigma)
    return WlsProblem(
        y_star,
        np.column_stack([X_star, root]),
        lam_eff,
        np.append(weights, 0.0),
        warm_start,
    )


def update_beta(state: MmState, ds: Dataset, cfg: FitConfig, weights) -> BetaUpdate:
    weights = np.asarray(weights, dtype=float)
    log_c = surrogate_scale(ds, state.beta_current, state.sigma_current, cfg.gamma, state.intercept_current)
    lam_eff = cfg.lam * np.exp(-log_c) if cfg.lam > 0 else 0.0

    _, excluded = split_weights(weights)
    start = np.where(excluded, 0.0, state.beta_current)
    prob = _augmented_problem(ds, state.mu, state.sigma_current, lam_eff, weights,
                              np.append(start, state.intercept_current))
    solution = solve_weighted_lasso(prob, cfg.epsilon_inner, cfg.max_inner_iter)
    return BetaUpdate(solution.beta[:-1], float(solution.beta[-1]), solution.converged)


def update_sigma(ds: Dataset, beta, sigma_prev: float, gamma: float, intercept: float = 0.0) -> float:
    '''
    One step of the approximate scale equation

        sigma^2 = mean(w r^2) / (mean(w) - gamma/(gamma+1)^(3/2)),
        w = exp(-(gamma/2) (r / sigma_prev)^2)
    '''
    if not sigma_prev > 0:
        raise NonPositiveSigma(f'sigma_prev must be positive, got {sigma_prev}')
    r = _residuals(ds, np.asarray(beta, dtype=float), intercept)
    if gamma == 0:
        sigma2 = float(np.mean(np.square(r)))
    else:
        w = np.exp(-0.5 * gamma * np.square(r / sigma_prev))
        bracket = w.mean() - gamma / (gamma + 1) ** 1.5
        if bracket <= 0:
            raise DegenerateScale(f'Scale update bracket is {bracket:.3e}: every point is judged an outlier')
        sigma2 = float(np.mean(w * np.square(r)) / bracket)

    sigma = np.sqrt(sigma2)
    if sigma < config['SIGMA_FLOOR']:
        logger.warning(f'Residual scale {sigma:.3e} clamped at {config["SIGMA_FLOOR"]:.1e}')
        sigma = config['SIGMA_FLOOR']
    return float(sigma)


class ScaleStep(NamedTuple):
    sigma: float
    degenerate: bool = False
    collapsed: bool = False


def _sigma_step(ds: Dataset, beta, intercept: float, sigma: float, gamma: float, sigma_min: float) -> ScaleStep:
    '''
    Never increases the loss: the approximate update is kept when it helps
    and stays above `sigma_min`, otherwise the loss is minimized in log sigma.
    When the update has no solution every point looks like an outlier, so
    only larger scales are searched and `degenerate` is set if none helps.
    `collapsed` marks a scale driven down to `sigma_min`, where the loss has
    no lower bound.
    '''
    r = _residuals(ds, beta, intercept)
    current = dpd_loss_from_residuals(r, sigma, gamma)
    low = max(sigma_min, sigma * 1e-3)
    degenerate = False
    try:
        candidate = update_sigma(ds, beta, sigma, gamma, intercept)
        if candidate >= sigma_min and dpd_loss_from_residuals(r, candidate, gamma) <= current:
            return ScaleStep(candidate)
    except DegenerateScale as e:
        logger.debug(f'{e}; searching larger scales')
        degenerate = True
        low = sigma

    res = minimize_scalar(
        lambda t: dpd_loss_from_residuals(r, np.exp(t), gamma),
        bounds=(np.log(low), np.log(sigma * 1e3)),
        method='bounded',
        options={'xatol': 1e-12},
    )
    if not res.fun < current:
        if degenerate:
            logger.warning(f'Scale equation has no solution and no larger scale helps; keeping sigma = {sigma:.6g}')
        return ScaleStep(sigma, degenerate)
    best = max(float(np.exp(res.x)), sigma_min)
    logger.debug(f'Scale step fell back to line search: sigma {sigma:.6g} -> {best:.6g}')
    return ScaleStep(best, collapsed=best <= sigma_min * (1 + 1e-6))


def fit(ds: Dataset, cfg: FitConfig, beta_init, sigma_init: float, intercept_init: float = 0.0,
        beta_tilde=None, sigma_ref: Optional[float] = None) -> FittedModel:
    '''
    Minimize Q from (beta_init, sigma_init). `beta_tilde` anchors the
    adaptive weights and defaults to `beta_init`. The fit stops unconverged
    once sigma falls below SIGMA_COLLAPSE_RATIO * `sigma_ref` (default
    `sigma_init`): past that point Q decreases without bound.
    '''
    beta = np.array(beta_init, dtype=float)
    if beta.shape != (ds.p,):
        raise DimensionMismatch(f'beta_init has shape {beta.shape}, dataset has p={ds.p}')
    sigma = float(cfg.sigma_fixed if cfg.sigma_fixed is not None else sigma_init)
    if not (np.isfinite(sigma) and sigma > 0):
        raise NonPositiveSigma(f'sigma_init must be finite and positive, got {sigma}')
    sigma_ref = sigma if sigma_ref is None else float(sigma_ref)
    sigma_min = min(sigma, max(config['SIGMA_FLOOR'], config['SIGMA_COLLAPSE_RATIO'] * sigma_ref))
    anchor = beta.copy() if beta_tilde is None else np.array(beta_tilde, dtype=float)
    gamma, lam = cfg.gamma, cfg.lam

    weights = anchor_weights(cfg, anchor)
    _, excluded = split_weights(weights)
    beta[excluded] = 0.0
    intercept = float(intercept_init)
    q = objective(ds, beta, sigma, gamma, lam, weights, intercept)
    trace = [q]
    converged = degenerate = False
    inner_ok = True
    reanchor = cfg.weight_scheme.is_adaptive and not cfg.freeze_weights

    it = 0
    for it in range(1, cfg.max_outer_iter + 1):
        state = MmState(beta, sigma, anchor, compute_mm_weights(ds, beta, sigma, gamma, intercept),
                        q, it, intercept, weights)
        step = update_beta(state, ds, cfg, weights)
        inner_ok &= step.converged
        q_beta = objective(ds, step.beta, sigma, gamma, lam, weights, step.intercept)
        if q_beta <= q:
            beta, intercept, q = step.beta, step.intercept, q_beta
        else:
            logger.debug(f'Iteration {it}: coefficient step rejected ({q_beta:.10g} > {q:.10g})')

        collapsed = False
        if cfg.sigma_fixed is None:
            sigma, flagged, collapsed = _sigma_step(ds, beta, intercept, sigma, gamma, sigma_min)
            degenerate |= flagged or collapsed
        q_new = objective(ds, beta, sigma, gamma, lam, weights, intercept)
        if collapsed:
            trace.append(q_new)
            logger.info(f'Iteration {it}: residual scale collapsed to {sigma:.3e} with '
                        f'{int(np.count_nonzero(beta))} coefficients, stopping')
            break

        if reanchor:
            new_weights = anchor_weights(cfg, beta)
            q_reanchored = objective(ds, beta, sigma, gamma, lam, new_weights, intercept)
            if q_reanchored <= q_new:
                anchor, weights, q_new = beta.copy(), new_weights, q_reanchored
            else:
                logger.debug(f'Iteration {it}: weight re-anchoring skipped, it would raise Q to {q_reanchored:.10g}')

        trace.append(q_new)
        logger.debug(f'Iteration {it}: Q={q_new:.10g} sigma={sigma:.6g} support={int(np.count_nonzero(beta))}')
        if abs(q_new - trace[-2]) <= cfg.epsilon_outer:
            converged = True
            break
        q = q_new

    if not converged:
        logger.debug(f'Outer loop stopped at max_outer_iter={cfg.max_outer_iter}')
    beta_raw, intercept_raw = coefficients_to_raw(beta, intercept, ds)
    return FittedModel(
        beta=beta_raw,
        beta_std=beta,
        sigma=sigma,
        intercept=intercept_raw,
        intercept_std=intercept,
        support=np.flatnonzero(np.abs(beta) > cfg.support_threshold),
        objective_trace=np.array(trace),
        converged=converged and inner_ok and not degenerate,
        n_outer_iter=it,
        gamma=gamma,
        lam=lam,
        weight_scheme=cfg.weight_scheme.label(),
        initializer=cfg.initializer.value,
    )


def best_fit(ds: Dataset, cfg: FitConfig, anchor, candidates) -> Optional[FittedModel]:
    '''
    Converged fits beat unconverged ones; among those the lower Q with the
    weights anchored at `anchor` wins. Ties keep the earlier candidate.
    '''
    weights = anchor_weights(cfg, anchor)
    best, best_key = None, None
    for model in candidates:
        if model is None:
            continue
        q = objective(ds, model.beta_std, model.sigma, cfg.gamma, cfg.lam, weights, model.intercept_std)
        key = (not model.converged, q)
        if best is None or key < best_key:
            best, best_key = model, key
    return best


def leverage_weights(X) -> np.ndarray:
    '''
    Row weights min(1, q / d_i^2)^2. d_i^2 is the squared distance of row i
    from the coordinatewise median in MAD units, rescaled so its median is
    the chi-square median; q is the LEVERAGE_QUANTILE chi-square quantile,
    both with p degrees of freedom.
    '''
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    scale = median_abs_deviation(X, axis=0, scale='normal')
    z = (X - np.median(X, axis=0)) / np.where(scale > 0, scale, 1.0)
    d2 = np.einsum('ij,ij->i', z, z)
    middle = np.median(d2)
    if middle > 0:
        d2 = d2 * chi2.median(p) / middle
    cutoff = chi2.ppf(config['LEVERAGE_QUANTILE'], p)
    return (cutoff / np.maximum(d2, cutoff)) ** 2


def _irls_lasso(ds: Dataset, cfg: FitConfig, robust: bool):
    y, X = ds.y, ds.X
    p = ds.p
    weights = np.append(np.ones(p), 0.0)
    beta, intercept = np.zeros(p), float(np.median(y) if robust else y.mean())
    leverage = leverage_weights(X) if robust else np.ones(ds.n)
    if robust:
        logger.debug(f'Initializer leverage weights: {int(np.sum(leverage < 1))} of {ds.n} rows downweighted')
    lam0 = None
    for _ in range(cfg.init_iterations if robust else 1):
        r = y - X @ beta - intercept
        w = leverage.copy()
        if robust:
            s = mad_sigma(r)
            if s > 0:
                w *= cfg.huber_c / np.maximum(np.abs(r / s), cfg.huber_c)
        root = np.sqrt(w)
        Xa = np.column_stack([root[:, None] * X, root])
        ya = root * y
        if lam0 is None:
            lam0 = cfg.init_lambda_ratio * lambda_max(Xa, ya, weights)
        solution = solve_weighted_lasso(
            WlsProblem(ya, Xa, lam0, weights, np.append(beta, intercept)),
            cfg.epsilon_inner, cfg.max_inner_iter,
        )
        beta, intercept = solution.beta[:-1], float(solution.beta[-1])
    return beta, intercept, y - X @ beta - intercept


def initialize(ds: Dataset, cfg: FitConfig) -> InitialEstimate:
    '''
    Starting point (standardized coordinates) for `fit`.
    '''
    if cfg.initializer is Initializer.PROVIDED:
        beta = np.array(cfg.initial_beta, dtype=float)
        if beta.shape != (ds.p,):
            raise DimensionMismatch(f'initial_beta has length {beta.shape[0]}, dataset has p={ds.p}')
        return InitialEstimate(beta, float(cfg.initial_sigma), float(cfg.initial_intercept))

    robust = cfg.initializer is Initializer.HUBER_LASSO_IRLS
    beta, intercept, r = _irls_lasso(ds, cfg, robust)
    sigma = mad_sigma(r) if robust else float(np.std(r, ddof=1))
    if not sigma > 0:
        logger.warning(f'Initial residual scale is zero, using {config["SINGULAR_INIT_SIGMA"]:.1e}')
        sigma = config['SINGULAR_INIT_SIGMA']
    return InitialEstimate(beta, sigma, intercept)


class NullPoint(NamedTuple):
    intercept: float
    sigma: float
    lambda_max: float


def null_point(ds: Dataset, cfg: FitConfig, init: InitialEstimate) -> NullPoint:
    '''
    Follows the fit from the initializer once every coefficient is zero:
    the first coefficient step at the initializer, then intercept/scale
    iterates at beta = 0 until the loss settles. Returns that fixed point and
    the largest KKT shutdown bound of the coefficient subproblem met on the
    way, so any lambda at or above it leaves the fit empty.
    '''
    scad_tied = cfg.weight_scheme.kind == 'scad' and cfg.scad_lambda is None
    if scad_tied:
        weights = np.ones(ds.p)
    else:
        weights = anchor_weights(cfg, init.beta)
    augmented = np.append(weights, 0.0)
    gamma = cfg.gamma

    def bound(beta, intercept, sigma):
        mu = compute_mm_weights(ds, beta, sigma, gamma, intercept)
        prob = _augmented_problem(ds, mu, sigma, 0.0, weights)
        log_c = surrogate_scale(ds, beta, sigma, gamma, intercept)
        return lambda_max(prob.X_star, prob.y_star, augmented) * np.exp(log_c), mu

    sigma = float(cfg.sigma_fixed if cfg.sigma_fixed is not None else init.sigma)
    intercept = float(init.intercept)
    best, mu = bound(init.beta, intercept, sigma)
    zero = np.zeros(ds.p)
    loss = np.inf
    for _ in range(cfg.max_outer_iter):
        # with beta = 0 the coefficient step only moves the intercept, to the mu-weighted mean
        intercept = float(mu @ ds.y)
        if cfg.sigma_fixed is None:
            sigma = _sigma_step(ds, zero, intercept, sigma, gamma, config['SIGMA_FLOOR']).sigma
        value, mu = bound(zero, intercept, sigma)
        best = max(best, value)
        new_loss = dpd_loss_from_residuals(ds.y - intercept, sigma, gamma)
        if abs(new_loss - loss) <= cfg.epsilon_outer:
            break
        loss = new_loss

    if scad_tied:
        best = max(best, float(np.max(np.abs(init.beta), initial=0.0)))
    if not best > 0:
        logger.warning('Lambda upper bound is zero (no penalized coordinates), using a tiny positive value')
        best = np.finfo(float).tiny ** 0.5
    return NullPoint(intercept, sigma, float(best))


def null_lambda_max(ds: Dataset, cfg: FitConfig, init: InitialEstimate) -> float:
    return null_point(ds, cfg, init).lambda_max


def estimate(ds: Dataset, cfg: FitConfig) -> FittedModel:
    '''
    Fits from the initializer and from the zero-coefficient point it leads
    to, and keeps the better result (`best_fit`).
    '''
    init = initialize(ds, cfg)
    start = null_point(ds, cfg, init)
    candidates = [
        fit(ds, cfg, init.beta, init.sigma, init.intercept, sigma_ref=init.sigma),
        fit(ds, cfg, np.zeros(ds.p), start.sigma, start.intercept, beta_tilde=init.beta, sigma_ref=init.sigma),
    ]
    return best_fit(ds, cfg, init.beta, candidates)
