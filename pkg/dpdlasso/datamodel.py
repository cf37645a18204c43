'''
Core value types: datasets, fit configuration, fitted models and paths.

All types are frozen after construction and their arrays are read-only, so
they can be shared between worker threads.
'''
import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .config import config
from .exceptions import ConstantColumn, DimensionMismatch, NonFiniteInput
from .utils import atomic_write_text
from .weights import WeightScheme


def _frozen_array(values, name, ndim=1, allow_inf=False) -> np.ndarray:
    a = np.array(values, dtype=float)
    if a.ndim != ndim:
        raise DimensionMismatch(f'{name} must be {ndim}-dimensional, got shape {a.shape}')
    if allow_inf:
        bad = np.isnan(a).any()
    else:
        bad = not np.isfinite(a).all()
    if bad:
        raise NonFiniteInput(f'{name} contains non-finite entries')
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    X: np.ndarray
    column_means: np.ndarray
    column_scales: np.ndarray
    y_mean: float = 0.0
    standardized: bool = False
    column_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        y = _frozen_array(self.y, 'y')
        X = _frozen_array(self.X, 'X', ndim=2)
        n, p = X.shape
        if y.shape[0] != n:
            raise DimensionMismatch(f'y has {y.shape[0]} rows, X has {n}')
        if n < 2 or p < 1:
            raise DimensionMismatch(f'Need n >= 2 and p >= 1, got n={n}, p={p}')
        means = _frozen_array(self.column_means, 'column_means')
        scales = _frozen_array(self.column_scales, 'column_scales')
        if means.shape[0] != p or scales.shape[0] != p:
            raise DimensionMismatch('Standardization metadata does not match the number of columns')
        if not (scales > 0).all():
            raise ConstantColumn(int(np.argmin(scales)))
        if not np.isfinite(self.y_mean):
            raise NonFiniteInput('y_mean is not finite')
        if self.standardized:
            if (np.abs(X.mean(axis=0)).max() > 1e-8 or np.abs(X.std(axis=0, ddof=1) - 1).max() > 1e-8
                    or abs(y.mean()) > 1e-8 * max(1.0, np.abs(y).max())):
                raise ValueError('Dataset flagged as standardized but columns are not z-scored')
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'column_means', means)
        object.__setattr__(self, 'column_scales', scales)
        object.__setattr__(self, 'y_mean', float(self.y_mean))
        if self.column_names is not None:
            if len(self.column_names) != p:
                raise DimensionMismatch('column_names length does not match the number of columns')
            object.__setattr__(self, 'column_names', tuple(self.column_names))

    @classmethod
    def unscaled(cls, y, X, column_names=None) -> 'Dataset':
        X = np.asarray(X, dtype=float)
        p = X.shape[1] if X.ndim == 2 else 0
        return cls(y, X, np.zeros(p), np.ones(p), 0.0, False, column_names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def raw(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.y + self.y_mean, self.X * self.column_scales + self.column_means

    def subset(self, rows) -> Tuple[np.ndarray, np.ndarray]:
        y_raw, X_raw = self.raw()
        return y_raw[rows], X_raw[rows]


def standardize(raw_y, raw_X, column_names: Optional[Sequence[str]] = None) -> Dataset:
    raw_y = np.asarray(raw_y, dtype=float)
    raw_X = np.asarray(raw_X, dtype=float)
    if raw_X.ndim != 2 or raw_y.ndim != 1 or raw_y.shape[0] != raw_X.shape[0]:
        raise DimensionMismatch(f'Inconsistent shapes: y {raw_y.shape}, X {raw_X.shape}')
    if not (np.isfinite(raw_y).all() and np.isfinite(raw_X).all()):
        raise NonFiniteInput('Input contains NaN or infinite values')
    if raw_X.shape[0] < 2:
        raise DimensionMismatch('Need at least two observations')

    means = raw_X.mean(axis=0)
    scales = raw_X.std(axis=0, ddof=1)
    for j in range(raw_X.shape[1]):
        if scales[j] <= 1e-12 * max(1.0, abs(means[j])):
            raise ConstantColumn(j)
    y_mean = raw_y.mean()
    return Dataset(raw_y - y_mean, (raw_X - means) / scales, means, scales, y_mean, True, column_names)


class Initializer(enum.Enum):
    PROVIDED = 'provided'
    HUBER_LASSO_IRLS = 'huber'
    OLS_LASSO = 'ols'


@dataclass(frozen=True)
class FitConfig:
    gamma: float = 0.5
    lam: float = 0.0
    weight_scheme: WeightScheme = field(default_factory=WeightScheme.unit)
    initializer: Initializer = Initializer.HUBER_LASSO_IRLS
    epsilon_outer: float = 1e-6
    epsilon_inner: float = 1e-8
    max_outer_iter: int = 100
    max_inner_iter: int = 1000
    support_threshold: float = 1e-8
    freeze_weights: bool = False
    sigma_fixed: Optional[float] = None
    scad_lambda: Optional[float] = None
    initial_beta: Optional[Tuple[float, ...]] = None
    initial_sigma: Optional[float] = None
    initial_intercept: float = 0.0
    huber_c: float = config['HUBER_C']
    init_lambda_ratio: float = config['INIT_LAMBDA_RATIO']
    init_iterations: int = config['INIT_ITERATIONS']

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f'gamma must be >= 0, got {self.gamma}')
        if not self.lam >= 0:
            raise ValueError(f'lambda must be >= 0, got {self.lam}')
        if not (self.epsilon_outer > 0 and self.epsilon_inner > 0 and self.support_threshold > 0):
            raise ValueError('Tolerances must be positive')
        if self.max_outer_iter < 1 or self.max_inner_iter < 1:
            raise ValueError('Iteration caps must be positive')
        if self.sigma_fixed is not None and not self.sigma_fixed > 0:
            raise ValueError('sigma_fixed must be positive')
        if self.initializer is Initializer.PROVIDED and (self.initial_beta is None or self.initial_sigma is None):
            raise ValueError('Provided initializer needs initial_beta and initial_sigma')
        if self.scad_lambda is not None and not self.scad_lambda > 0:
            raise ValueError('scad_lambda must be positive')
        if self.initial_beta is not None:
            object.__setattr__(self, 'initial_beta', tuple(float(b) for b in self.initial_beta))


@dataclass(frozen=True)
class FittedModel:
    beta: np.ndarray
    beta_std: np.ndarray
    sigma: float
    intercept: float
    intercept_std: float
    support: Tuple[int, ...]
    objective_trace: np.ndarray
    converged: bool
    n_outer_iter: int
    gamma: float
    lam: float
    weight_scheme: str = 'unit'
    initializer: str = Initializer.HUBER_LASSO_IRLS.value

    def __post_init__(self):
        beta = _frozen_array(self.beta, 'beta')
        beta_std = _frozen_array(self.beta_std, 'beta_std')
        if beta.shape != beta_std.shape:
            raise DimensionMismatch('beta and beta_std lengths differ')
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise NonFiniteInput(f'sigma must be finite and positive, got {self.sigma}')
        if not (np.isfinite(self.intercept) and np.isfinite(self.intercept_std)):
            raise NonFiniteInput('intercept is not finite')
        support = tuple(int(j) for j in self.support)
        if any(j < 0 or j >= beta.shape[0] for j in support):
            raise DimensionMismatch('support index out of range')
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'beta_std', beta_std)
        object.__setattr__(self, 'support', support)
        object.__setattr__(self, 'objective_trace', _frozen_array(self.objective_trace, 'objective_trace'))
        object.__setattr__(self, 'sigma', float(self.sigma))

    @property
    def ms(self) -> int:
        return len(self.support)

    def predict(self, X_raw) -> np.ndarray:
        return self.intercept + np.asarray(X_raw, dtype=float) @ self.beta

    def to_dict(self) -> dict:
        return {
            'beta': self.beta.tolist(),
            'intercept': self.intercept,
            'sigma': self.sigma,
            'support': [j + 1 for j in self.support],
            'gamma': self.gamma,
            'lambda': self.lam,
            'weight_scheme': self.weight_scheme,
            'initializer': self.initializer,
            'converged': self.converged,
            'n_outer_iter': self.n_outer_iter,
            'beta_std': self.beta_std.tolist(),
            'intercept_std': self.intercept_std,
            'objective_trace': self.objective_trace.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'FittedModel':
        beta = data['beta']
        return cls(
            beta=beta,
            beta_std=data.get('beta_std', beta),
            sigma=data['sigma'],
            intercept=data['intercept'],
            intercept_std=data.get('intercept_std', 0.0),
            support=[j - 1 for j in data['support']],
            objective_trace=data.get('objective_trace', []),
            converged=data.get('converged', True),
            n_outer_iter=data.get('n_outer_iter', 0),
            gamma=data['gamma'],
            lam=data['lambda'],
            weight_scheme=data.get('weight_scheme', 'unit'),
            initializer=data.get('initializer', Initializer.HUBER_LASSO_IRLS.value),
        )


def save_model_json(model: FittedModel, path, column_names=None):
    data = model.to_dict()
    if column_names is not None:
        data['columns'] = list(column_names)
    atomic_write_text(path, json.dumps(data, indent=2) + '\n')


def load_model_json(path) -> Tuple[FittedModel, Optional[list]]:
    with open(path) as f:
        data = json.load(f)
    return FittedModel.from_dict(data), data.get('columns')


@dataclass(frozen=True)
class RegularizationPath:
    lambdas: np.ndarray
    models: Tuple[Optional[FittedModel], ...]
    hbic: np.ndarray
    selected_index: int
    cv_error: Optional[np.ndarray] = None

    def __post_init__(self):
        lambdas = _frozen_array(self.lambdas, 'lambdas')
        if len(lambdas) > 1 and not (np.diff(lambdas) < 0).all():
            raise ValueError('lambdas must be strictly decreasing')
        hbic = _frozen_array(self.hbic, 'hbic', allow_inf=True)
        if len(self.models) != len(lambdas) or len(hbic) != len(lambdas):
            raise DimensionMismatch('path arrays must have the grid length')
        if self.cv_error is not None:
            cv_error = _frozen_array(self.cv_error, 'cv_error', allow_inf=True)
            if len(cv_error) != len(lambdas):
                raise DimensionMismatch('cv_error must have the grid length')
            object.__setattr__(self, 'cv_error', cv_error)
        if not 0 <= self.selected_index < len(lambdas):
            raise ValueError('selected_index out of range')
        object.__setattr__(self, 'lambdas', lambdas)
        object.__setattr__(self, 'hbic', hbic)
        object.__setattr__(self, 'models', tuple(self.models))

    @property
    def selected(self) -> Optional[FittedModel]:
        return self.models[self.selected_index]


def coefficients_to_raw(beta_std, intercept_std: float, ds: Dataset) -> Tuple[np.ndarray, float]:
    beta_std = np.asarray(beta_std, dtype=float)
    if beta_std.shape != (ds.p,):
        raise DimensionMismatch(f'Coefficient vector has length {beta_std.shape}, dataset has p={ds.p}')
    beta_raw = beta_std / ds.column_scales
    intercept = ds.y_mean + intercept_std - float(beta_raw @ ds.column_means)
    return beta_raw, intercept


def destandardize_coefficients(model: FittedModel, ds: Dataset) -> Tuple[np.ndarray, float]:
    return coefficients_to_raw(model.beta_std, model.intercept_std, ds)


