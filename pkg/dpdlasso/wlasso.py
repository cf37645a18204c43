'''
Weighted-l1 penalized least squares

    minimize  sum_i (y_i - x_i'b)^2 + lam * sum_j w_j |b_j|

by cyclic coordinate descent over an active set, with a full sweep every
FULL_SWEEP_PERIOD passes. Coordinates with w_j = +inf are excluded (held at
zero); w_j = 0 leaves a coordinate unpenalized.
'''
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .config import config
from .exceptions import DimensionMismatch, NonFiniteInput, ZeroWeightInRescaling
from .logging import logger
from .weights import split_weights


@njit(nogil=True, cache=True)
def _coordinate_pass(X, r, beta, col_sq, penalty, coords):
    n = X.shape[0]
    max_step = 0.0
    for k in range(coords.shape[0]):
        j = coords[k]
        c = col_sq[j]
        if c == 0.0:
            continue
        old = beta[j]
        rho = c * old
        for i in range(n):
            rho += X[i, j] * r[i]
        thr = 0.5 * penalty[j]
        if rho > thr:
            new = (rho - thr) / c
        elif rho < -thr:
            new = (rho + thr) / c
        else:
            new = 0.0
        if new != old:
            d = new - old
            for i in range(n):
                r[i] -= X[i, j] * d
            beta[j] = new
            step = 2.0 * c * abs(d)
            if step > max_step:
                max_step = step
    return max_step


@njit(nogil=True, cache=True)
def _refresh_and_kkt(X, y, beta, penalty, free, r):
    n, p = X.shape
    for i in range(n):
        acc = y[i]
        for j in range(p):
            if beta[j] != 0.0:
                acc -= X[i, j] * beta[j]
        r[i] = acc
    worst = 0.0
    for k in range(free.shape[0]):
        j = free[k]
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        g *= 2.0
        if beta[j] == 0.0:
            v = abs(g) - penalty[j]
            if v < 0.0:
                v = 0.0
        else:
            v = abs(g - penalty[j] * np.sign(beta[j]))
        if v > worst:
            worst = v
    return worst


@njit(nogil=True, cache=True)
def _cd_solve(X, y, penalty, free, beta, tol, max_sweeps, period):
    n = X.shape[0]
    col_sq = np.zeros(X.shape[1])
    for k in range(free.shape[0]):
        j = free[k]
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        col_sq[j] = s

    r = np.empty(n)
    kkt = _refresh_and_kkt(X, y, beta, penalty, free, r)
    if kkt <= tol:
        return beta, 0, True, kkt

    sweeps = 0
    while sweeps < max_sweeps:
        _coordinate_pass(X, r, beta, col_sq, penalty, free)
        sweeps += 1
        passes = 1
        while passes < period and sweeps < max_sweeps:
            active = free[beta[free] != 0.0]
            if active.shape[0] == 0:
                break
            step = _coordinate_pass(X, r, beta, col_sq, penalty, active)
            sweeps += 1
            passes += 1
            if step <= tol:
                break
        kkt = _refresh_and_kkt(X, y, beta, penalty, free, r)
        if kkt <= tol:
            return beta, sweeps, True, kkt
    return beta, sweeps, False, kkt


@dataclass(frozen=True)
class WlsProblem:
    y_star: np.ndarray
    X_star: np.ndarray
    lam: float
    weights: np.ndarray
    warm_start: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.ascontiguousarray(self.y_star, dtype=float)
        X = np.ascontiguousarray(self.X_star, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],) or w.shape != (X.shape[1],):
            raise DimensionMismatch(f'Inconsistent problem shapes: y {y.shape}, X {X.shape}, w {w.shape}')
        if not (np.isfinite(y).all() and np.isfinite(X).all()):
            raise NonFiniteInput('Subproblem data contains non-finite entries')
        if np.isnan(w).any() or (w < 0).any():
            raise ValueError('weights must be in [0, +inf]')
        if not self.lam >= 0:
            raise ValueError(f'lambda must be >= 0, got {self.lam}')
        object.__setattr__(self, 'y_star', y)
        object.__setattr__(self, 'X_star', X)
        object.__setattr__(self, 'weights', w)
        if self.warm_start is not None:
            start = np.asarray(self.warm_start, dtype=float)
            if start.shape != w.shape:
                raise DimensionMismatch('warm_start length does not match the number of columns')
            if (start[np.isinf(w)] != 0).any():
                raise ValueError('Excluded coordinates must have a zero warm start')
            object.__setattr__(self, 'warm_start', start)

    @property
    def n_features(self) -> int:
        return self.X_star.shape[1]

    def objective(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        r = self.y_star - self.X_star @ beta
        finite, excluded = split_weights(self.weights)
        return float(r @ r + self.lam * np.sum(finite[~excluded] * np.abs(beta[~excluded])))


class WlsSolution(NamedTuple):
    beta: np.ndarray
    converged: bool
    n_sweeps: int
    kkt_violation: float


def solve_weighted_lasso(prob: WlsProblem, epsilon_inner: float = 1e-8, max_inner_iter: int = 1000) -> WlsSolution:
    finite, excluded = split_weights(prob.weights)
    free = np.flatnonzero(~excluded).astype(np.int64)
    if prob.warm_start is None:
        beta = np.zeros(prob.n_features)
    else:
        beta = prob.warm_start.copy()

    beta, sweeps, converged, kkt = _cd_solve(
        prob.X_star, prob.y_star, prob.lam * finite, free, beta,
        float(epsilon_inner), int(max_inner_iter), int(config['FULL_SWEEP_PERIOD']),
    )
    if converged:
        logger.debug(f'Coordinate descent converged after {sweeps} sweeps (KKT violation {kkt:.3e})')
    else:
        logger.warning(f'Coordinate descent hit {max_inner_iter} sweeps, KKT violation {kkt:.3e}')
    return WlsSolution(beta, bool(converged), int(sweeps), float(kkt))


def lambda_max(X, y, weights) -> float:
    '''
    Smallest lambda at which every penalized coordinate is zero. Unpenalized
    columns (w = 0) are fitted by least squares first.
    '''
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    finite, excluded = split_weights(weights)
    unpenalized = (~excluded) & (finite == 0)
    penalized = (~excluded) & (finite > 0)
    if not penalized.any():
        return 0.0
    r = y
    if unpenalized.any():
        coef, *_ = np.linalg.lstsq(X[:, unpenalized], y, rcond=None)
        r = y - X[:, unpenalized] @ coef
    return float(np.max(2 * np.abs(X[:, penalized].T @ r) / finite[penalized]))


def solve_via_rescaling(y, X, lam: float, weights, epsilon_inner: float = 1e-8,
                        max_inner_iter: int = 1000) -> np.ndarray:
    '''
    Adaptive LASSO through a plain LASSO on the column-rescaled design
    x_j / w_j, mapping the solution back by b_j / w_j.
    '''
    X = np.asarray(X, dtype=float)
    finite, excluded = split_weights(weights)
    kept = np.flatnonzero(~excluded)
    w = finite[kept]
    if (w == 0).any():
        raise ZeroWeightInRescaling(
            f'Coordinates {(kept[w == 0] + 1).tolist()} have zero weight and cannot be rescaled'
        )

    beta = np.zeros(X.shape[1])
    if kept.size == 0:
        return beta
    rescaled = WlsProblem(y, X[:, kept] / w, lam, np.ones(kept.size))
    solution = solve_weighted_lasso(rescaled, epsilon_inner, max_inner_iter)
    beta[kept] = solution.beta / w
    return beta
