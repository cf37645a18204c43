'''
Lambda grids, HBIC scoring, cross-validation and regularization paths.
'''
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional, Sequence, Union

import numpy as np

from .config import config
from .datamodel import Dataset, FitConfig, FittedModel, RegularizationPath, standardize
from .diagnostics import trimmed_rmse
from .dpdloss import dpd_loss_from_residuals
from .exceptions import DpdLassoError, InvalidSampleSize, PTooSmall
from .logging import logger
from .mmfit import InitialEstimate, best_fit, fit, initialize, null_lambda_max
from .utils import rng_stream


@dataclass(frozen=True)
class Hbic:

    def label(self) -> str:
        return 'hbic'


@dataclass(frozen=True)
class KFoldCv:
    k: int = 5
    loss: Literal['dpd', 'trimmed'] = 'dpd'
    trim: float = 0.1

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f'Cross-validation needs k >= 2, got {self.k}')
        if self.loss not in ('dpd', 'trimmed'):
            raise ValueError(f'Unknown validation loss: {self.loss}')
        if not 0 <= self.trim < 0.5:
            raise ValueError(f'trim must be in [0, 0.5), got {self.trim}')

    def label(self) -> str:
        return f'cv{self.k}-{self.loss}'

    def validation_loss(self, model: FittedModel, y_raw, X_raw) -> float:
        r = y_raw - model.predict(X_raw)
        if self.loss == 'dpd':
            return dpd_loss_from_residuals(r, model.sigma, model.gamma)
        return trimmed_rmse(r, 1 - self.trim) ** 2


@dataclass(frozen=True)
class SelectionConfig:
    n_lambdas: int = 50
    lambda_min_ratio: float = 1e-3
    criterion: Union[Hbic, KFoldCv] = field(default_factory=Hbic)
    seed: int = 0

    def __post_init__(self):
        if self.n_lambdas < 1:
            raise ValueError(f'n_lambdas must be positive, got {self.n_lambdas}')
        if not 0 < self.lambda_min_ratio < 1:
            raise ValueError(f'lambda_min_ratio must be in (0, 1), got {self.lambda_min_ratio}')

    @property
    def uses_cv(self) -> bool:
        return isinstance(self.criterion, KFoldCv)


def lambda_grid(ds: Dataset, cfg: FitConfig, sel: SelectionConfig,
                init: Optional[InitialEstimate] = None) -> np.ndarray:
    if init is None:
        init = initialize(ds, cfg)
    lam_max = null_lambda_max(ds, cfg, init)
    if sel.n_lambdas == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_max * sel.lambda_min_ratio, sel.n_lambdas)


def check_hbic_size(n: int, p: int):
    if n < 3:
        raise InvalidSampleSize(f'HBIC needs n >= 3, got {n}')
    if p < 2:
        raise PTooSmall(f'HBIC needs p >= 2, got {p}')


def hbic(model: FittedModel, n: int, p: int) -> float:
    '''
    log(sigma^2) + log(log n) * log(p) / n * |support|

    A fit using n - 1 or more coefficients is saturated and scores +inf.
    '''
    check_hbic_size(n, p)
    if model.ms >= n - 1:
        return np.inf
    return float(np.log(model.sigma ** 2) + np.log(np.log(n)) * np.log(p) / n * model.ms)


def select_index(lambdas, scores) -> int:
    '''Index of the minimal score; ties go to the largest lambda.'''
    lambdas = np.asarray(lambdas, dtype=float)
    scores = np.asarray(scores, dtype=float)
    tied = np.flatnonzero(scores == scores.min())
    return int(tied[np.argmax(lambdas[tied])])


def _fit_chain(ds: Dataset, cfg: FitConfig, lambdas, indices: Sequence[int], start: Optional[FittedModel],
               init: InitialEstimate) -> List[Optional[FittedModel]]:
    '''
    Fits each lambda from the previous converged model of the chain (or the
    initializer when there is none yet) and from the initializer, keeping
    the better fit.
    '''
    models = []
    for i in indices:
        lam_cfg = replace(cfg, lam=float(lambdas[i]))
        starts = [(init.beta, init.intercept, init.sigma)]
        if start is not None:
            starts.insert(0, (start.beta_std, start.intercept_std, start.sigma))
        candidates = []
        for beta, intercept, sigma in starts:
            try:
                candidates.append(fit(ds, lam_cfg, beta, sigma, intercept, beta_tilde=init.beta, sigma_ref=init.sigma))
            except DpdLassoError as e:
                logger.warning(f'Fit at lambda={lambdas[i]:.6g} failed: {e}')
        model = best_fit(ds, lam_cfg, init.beta, candidates)
        if model is not None:
            logger.debug(f'lambda[{i}]={lambdas[i]:.6g}: MS={model.ms} sigma={model.sigma:.6g} '
                         f'converged={model.converged}')
            if model.converged:
                start = model
        models.append(model)
    return models


def fit_grid(ds: Dataset, cfg: FitConfig, lambdas, init: InitialEstimate,
             executor: Optional[ThreadPoolExecutor] = None) -> List[Optional[FittedModel]]:
    '''
    Warm-started fits over a descending grid. The first PATH_WARM_START_PREFIX
    lambdas run in sequence; the rest are cut into fixed blocks, each started
    from the prefix's last converged model, so results do not depend on the
    worker count.
    '''
    n_prefix = min(config['PATH_WARM_START_PREFIX'], len(lambdas))
    block = config['PATH_WARM_START_BLOCK']

    models = _fit_chain(ds, cfg, lambdas, range(n_prefix), None, init)
    start = next((m for m in reversed(models) if m is not None and m.converged), None)

    blocks = [range(i, min(i + block, len(lambdas))) for i in range(n_prefix, len(lambdas), block)]
    run = lambda indices: _fit_chain(ds, cfg, lambdas, indices, start, init)
    results = executor.map(run, blocks) if executor is not None else map(run, blocks)
    for chunk in results:
        models.extend(chunk)
    return models


def path_scores(models: Sequence[Optional[FittedModel]], n: int, p: int) -> np.ndarray:
    '''
    HBIC per model. Failed and unconverged fits, collapsed scales included,
    score +inf, as does every model when HBIC is undefined for (n, p).
    '''
    try:
        check_hbic_size(n, p)
    except DpdLassoError:
        return np.full(len(models), np.inf)
    return np.array([hbic(m, n, p) if m is not None and m.converged else np.inf for m in models])


def _fold_errors(ds: Dataset, cfg: FitConfig, criterion: KFoldCv, lambdas, test_rows) -> np.ndarray:
    errors = np.full(len(lambdas), np.inf)
    y_raw, X_raw = ds.raw()
    train_rows = np.setdiff1d(np.arange(ds.n), test_rows)
    try:
        train = standardize(y_raw[train_rows], X_raw[train_rows])
        models = fit_grid(train, cfg, lambdas, initialize(train, cfg))
    except DpdLassoError as e:
        logger.warning(f'Cross-validation fold of {len(test_rows)} rows failed: {e}')
        return errors
    for i, model in enumerate(models):
        if model is not None and model.converged:
            errors[i] = criterion.validation_loss(model, y_raw[test_rows], X_raw[test_rows])
    return errors


def cross_validate(ds: Dataset, cfg: FitConfig, sel: SelectionConfig, lambdas,
                   threads: Optional[int] = None) -> np.ndarray:
    '''
    Mean held-out loss per lambda over contiguous folds of a seeded
    permutation. Each fold refits its own initializer on the training rows.
    '''
    criterion = sel.criterion
    order = rng_stream(sel.seed).permutation(ds.n)
    folds = np.array_split(order, criterion.k)
    with ThreadPoolExecutor(max_workers=threads or config['CONCURRENT_MAX_WORKERS']) as executor:
        errors = list(executor.map(lambda rows: _fold_errors(ds, cfg, criterion, lambdas, rows), folds))
    return np.mean(errors, axis=0)


def fit_path(ds: Dataset, cfg: FitConfig, sel: SelectionConfig, threads: Optional[int] = None) -> RegularizationPath:
    if not sel.uses_cv:
        check_hbic_size(ds.n, ds.p)
    init = initialize(ds, cfg)
    lambdas = lambda_grid(ds, cfg, sel, init)
    logger.debug(f'Lambda grid: {lambdas[0]:.6g} .. {lambdas[-1]:.6g} ({len(lambdas)} values)')

    with ThreadPoolExecutor(max_workers=threads or config['CONCURRENT_MAX_WORKERS']) as executor:
        models = fit_grid(ds, cfg, lambdas, init, executor)
    scores = path_scores(models, ds.n, ds.p)

    cv_error = None
    if sel.uses_cv:
        cv_error = cross_validate(ds, cfg, sel, lambdas, threads)
        selected = select_index(lambdas, cv_error)
    else:
        selected = select_index(lambdas, scores)

    return RegularizationPath(lambdas, tuple(models), scores, selected, cv_error)
