'''
Synthetic sparse regression studies with response and covariate outliers.
'''
import configparser
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .config import config
from .datamodel import Dataset, FitConfig, Initializer, standardize
from .diagnostics import tau_scale
from .exceptions import DpdLassoError, DimensionMismatch, InvalidScenario, PTooSmall
from .logging import logger
from .selection import SelectionConfig, fit_path
from .utils import atomic_open, rng_stream
from .weights import WeightScheme

TRAIN_STREAM, TEST_STREAM, CONTAMINATION_STREAM = 0, 1, 2
METRIC_NAMES = ('ms', 'tp', 'tn', 'mses', 'msen', 'ee_sigma', 'aprb')
BLOCK_PATTERN = (3.0, 1.5, 0.0, 0.0, 2.0)


@dataclass(frozen=True)
class NoContamination:
    frac: float = 0.0

    def label(self) -> str:
        return 'none'


@dataclass(frozen=True)
class YOutliers:
    frac: float = 0.1
    mean: float = 20.0
    sd: float = 1.0

    def label(self) -> str:
        return f'y({self.frac:g})'


@dataclass(frozen=True)
class XOutliers:
    frac: float = 0.1
    n_cols: int = 10
    mean: float = 20.0
    sd: float = 1.0
    random_columns: bool = False

    def label(self) -> str:
        return f'x({self.frac:g})'


Contamination = Union[NoContamination, YOutliers, XOutliers]


@dataclass(frozen=True)
class SimScenario:
    n: int = 100
    p: int = 50
    setting: str = 'A'
    contamination: Contamination = field(default_factory=NoContamination)
    sigma0: float = 0.5
    rho: float = 0.5
    n_replications: int = 50
    seed: int = 0
    n_test: int = 100

    def __post_init__(self):
        if self.setting not in ('A', 'B'):
            raise InvalidScenario(f'Unknown setting {self.setting!r}, expected A or B')
        if not 0 <= self.contamination.frac < 1:
            raise InvalidScenario(f'Contamination fraction must be in [0, 1), got {self.contamination.frac}')
        if self.n < 3 or self.n_test < 2 or self.n_replications < 1:
            raise InvalidScenario('Need n >= 3, n_test >= 2 and n_replications >= 1')
        if not (-1 < self.rho < 1 and self.sigma0 > 0):
            raise InvalidScenario('Need |rho| < 1 and sigma0 > 0')
        true_beta(self.setting, self.p)


def true_beta(setting: str, p: int) -> np.ndarray:
    '''
    A: (3, 1.5, 0, 0, 2, 0, ...). B: the same five-value pattern leading
    each of three blocks of 20 coordinates.
    '''
    n_blocks = 1 if setting == 'A' else 3
    needed = len(BLOCK_PATTERN) if setting == 'A' else 60
    if p < needed:
        raise PTooSmall(f'Setting {setting} needs p >= {needed}, got {p}')
    beta = np.zeros(p)
    for b in range(n_blocks):
        beta[20 * b:20 * b + len(BLOCK_PATTERN)] = BLOCK_PATTERN
    return beta


def toeplitz_rows(rng: np.random.Generator, n: int, p: int, rho: float) -> np.ndarray:
    '''Rows with covariance rho^|i-j| from the AR(1) recursion across columns.'''
    z = rng.standard_normal((n, p))
    X = np.empty_like(z)
    X[:, 0] = z[:, 0]
    innovation = np.sqrt(1 - rho ** 2)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + innovation * z[:, j]
    return X


class SimDraw(NamedTuple):
    train: Dataset
    test: Dataset
    beta0: np.ndarray
    sigma0: float


def generate(scenario: SimScenario, rep_index: int) -> SimDraw:
    beta0 = true_beta(scenario.setting, scenario.p)

    def draw(stream, n):
        rng = rng_stream(scenario.seed, rep_index, stream)
        X = toeplitz_rows(rng, n, scenario.p, scenario.rho)
        y = X @ beta0 + scenario.sigma0 * rng.standard_normal(n)
        return Dataset.unscaled(y, X)

    return SimDraw(draw(TRAIN_STREAM, scenario.n), draw(TEST_STREAM, scenario.n_test), beta0, scenario.sigma0)


def contaminate(ds_raw: Dataset, scenario: SimScenario, rng: np.random.Generator) -> Dataset:
    contam = scenario.contamination
    n_rows = int(np.floor(contam.frac * ds_raw.n + 1e-9))
    if n_rows == 0:
        return ds_raw

    y, X = ds_raw.raw()
    rows = rng.choice(ds_raw.n, n_rows, replace=False)
    if isinstance(contam, YOutliers):
        y[rows] += rng.normal(contam.mean, contam.sd, n_rows)
    elif isinstance(contam, XOutliers):
        n_cols = min(contam.n_cols, ds_raw.p)
        if contam.random_columns:
            cols = np.sort(rng.choice(ds_raw.p, n_cols, replace=False))
        else:
            cols = np.arange(n_cols)
        X[np.ix_(rows, cols)] += rng.normal(contam.mean, contam.sd, (n_rows, n_cols))
    return Dataset.unscaled(y, X, ds_raw.column_names)


class MetricRow(NamedTuple):
    ms: float
    tp: float
    tn: float
    mses: float
    msen: float
    ee_sigma: float
    aprb: float


def metrics(beta_hat, sigma_hat: float, beta0, sigma0: float, test_pair, intercept: float = 0.0,
            support: Optional[Sequence[int]] = None, threshold: float = 1e-8) -> MetricRow:
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    y_test, X_test = (np.asarray(a, dtype=float) for a in test_pair)
    if beta_hat.shape != beta0.shape or X_test.shape != (y_test.shape[0], beta0.shape[0]):
        raise DimensionMismatch('Coefficient and test-set dimensions do not agree')

    truth = beta0 != 0
    if support is None:
        selected = np.abs(beta_hat) > threshold
    else:
        selected = np.zeros(beta0.shape[0], dtype=bool)
        selected[list(support)] = True
    s, p = int(truth.sum()), beta0.shape[0]

    tp = np.count_nonzero(selected & truth) / s if s else 1.0
    tn = np.count_nonzero(~selected & ~truth) / (p - s) if p > s else 1.0
    mses = float(np.mean((beta_hat[truth] - beta0[truth]) ** 2)) if s else 0.0
    msen = float(np.sum(beta_hat[~truth] ** 2) / (p - s)) if p > s else 0.0
    aprb = float(np.mean(np.abs(y_test - intercept - X_test @ beta_hat)))
    return MetricRow(float(selected.sum()), tp, tn, mses, msen, abs(sigma_hat - sigma0), aprb)


@dataclass(frozen=True)
class StudyMethod:
    name: str
    fit_config: FitConfig
    selection_config: SelectionConfig = field(default_factory=SelectionConfig)

    @classmethod
    def from_config(cls, cfg: FitConfig, sel: Optional[SelectionConfig] = None) -> 'StudyMethod':
        return cls(method_name(cfg), cfg, sel or SelectionConfig())


def method_name(cfg: FitConfig) -> str:
    kind = cfg.weight_scheme.kind
    if cfg.gamma == 0:
        base = {'unit': 'LS-LASSO', 'adaptive': 'Ad-LS-LASSO', 'scad': 'AW-LS-LASSO'}[kind]
        return base
    base = {'unit': 'DPD-LASSO', 'adaptive': 'Ad-DPD-LASSO', 'scad': 'AW-DPD-LASSO'}[kind]
    return f'{base} gamma={cfg.gamma:g}'


def ls_baselines(sel: Optional[SelectionConfig] = None) -> List[StudyMethod]:
    sel = sel or SelectionConfig()
    return [
        StudyMethod('LS-LASSO', FitConfig(gamma=0.0, initializer=Initializer.OLS_LASSO), sel),
        StudyMethod('Ad-LS-LASSO', FitConfig(gamma=0.0, weight_scheme=WeightScheme.hard_threshold(),
                                             initializer=Initializer.OLS_LASSO), sel),
    ]


@dataclass(frozen=True)
class SimReport:
    '''
    One row per method: replication means of every metric, their standard
    errors (columns suffixed `_se`), and completed/failed replication counts.
    '''
    table: pd.DataFrame

    def row(self, method: str) -> dict:
        return self.table.set_index('method').loc[method].to_dict()

    def to_csv(self, path):
        with atomic_open(path) as f:
            self.table.to_csv(f, index=False, float_format='%.10g')


def _replicate(scenario: SimScenario, methods: Sequence[StudyMethod], rep: int) -> List[Optional[MetricRow]]:
    draw = generate(scenario, rep)
    train = contaminate(draw.train, scenario, rng_stream(scenario.seed, rep, CONTAMINATION_STREAM))
    test_pair = draw.test.raw()
    rows = []
    try:
        ds = standardize(*train.raw())
    except DpdLassoError as e:
        logger.warning(f'Replication {rep}: {e}')
        return [None] * len(methods)

    for method in methods:
        try:
            model = fit_path(ds, method.fit_config, method.selection_config, threads=1).selected
        except DpdLassoError as e:
            logger.warning(f'Replication {rep}, {method.name}: {e}')
            model = None
        if model is None:
            rows.append(None)
            continue
        rows.append(metrics(model.beta, model.sigma, draw.beta0, draw.sigma0, test_pair,
                            intercept=model.intercept, support=model.support))
    logger.info(f'Replication {rep + 1}/{scenario.n_replications} done')
    return rows


def run_study(scenario: SimScenario, methods: Sequence[StudyMethod], threads: Optional[int] = None) -> SimReport:
    with ThreadPoolExecutor(max_workers=threads or config['CONCURRENT_MAX_WORKERS']) as executor:
        results = list(executor.map(lambda rep: _replicate(scenario, methods, rep), range(scenario.n_replications)))

    records = []
    for k, method in enumerate(methods):
        rows = [rep_rows[k] for rep_rows in results if rep_rows[k] is not None]
        failed = len(results) - len(rows)
        if failed:
            logger.warning(f'{method.name}: {failed} of {len(results)} replications failed and are excluded')
        record = {'method': method.name, 'n_ok': len(rows), 'n_failed': failed}
        values = np.array(rows, dtype=float).reshape(len(rows), len(METRIC_NAMES))
        for j, name in enumerate(METRIC_NAMES):
            column = values[:, j]
            record[name] = column.mean() if len(rows) else np.nan
            record[f'{name}_se'] = column.std(ddof=1) / np.sqrt(len(rows)) if len(rows) > 1 else 0.0
        records.append(record)
    return SimReport(pd.DataFrame.from_records(records))


def split_study(y_raw, X_raw, methods: Sequence[StudyMethod], n_test: int, n_repeats: int = 100,
                seed: int = 0, threads: Optional[int] = None) -> pd.DataFrame:
    '''
    Repeated random train/test splits of one dataset; returns the tau-scale
    of the test residuals per repeat and method (NaN where a fit failed).
    '''
    y_raw = np.asarray(y_raw, dtype=float)
    X_raw = np.asarray(X_raw, dtype=float)
    n = y_raw.shape[0]
    if not 0 < n_test < n - 2:
        raise InvalidScenario(f'n_test must leave at least three training rows, got {n_test} of {n}')

    def one(rep):
        order = rng_stream(seed, rep, TEST_STREAM).permutation(n)
        test, train = order[:n_test], order[n_test:]
        values = []
        for method in methods:
            try:
                ds = standardize(y_raw[train], X_raw[train])
                model = fit_path(ds, method.fit_config, method.selection_config, threads=1).selected
                values.append(np.nan if model is None else tau_scale(y_raw[test] - model.predict(X_raw[test])))
            except DpdLassoError as e:
                logger.warning(f'Split {rep}, {method.name}: {e}')
                values.append(np.nan)
        return values

    with ThreadPoolExecutor(max_workers=threads or config['CONCURRENT_MAX_WORKERS']) as executor:
        results = list(executor.map(one, range(n_repeats)))
    return pd.DataFrame(results, columns=[m.name for m in methods])


_SCENARIO_KEYS = {
    'n': int, 'p': int, 'setting': str, 'sigma0': float, 'rho': float,
    'n_replications': int, 'seed': int, 'n_test': int,
}
_CONTAMINATION_KEYS = {
    'contamination': str, 'frac': float, 'outlier_mean': float, 'outlier_sd': float,
    'n_cols': int, 'random_columns': bool,
}


def load_scenario(path) -> SimScenario:
    '''
    Read a flat `key = value` scenario file. Keys: n, p, setting (A|B),
    sigma0, rho, n_replications, seed, n_test, contamination (none|y|x),
    frac, outlier_mean, outlier_sd, n_cols, random_columns.
    '''
    parser = configparser.ConfigParser()
    with open(path) as f:
        try:
            parser.read_string('[scenario]\n' + f.read())
        except configparser.Error as e:
            raise InvalidScenario(f'Cannot parse scenario file {path}: {e}')
    section = parser['scenario']

    unknown = set(section) - set(_SCENARIO_KEYS) - set(_CONTAMINATION_KEYS)
    if unknown:
        raise InvalidScenario(f'Unknown scenario keys: {sorted(unknown)}')

    try:
        kwargs = {key: (section.getboolean(key) if kind is bool else kind(section[key]))
                  for key, kind in _SCENARIO_KEYS.items() if key in section}
        kind = section.get('contamination', 'none').strip().lower()
        frac = section.getfloat('frac', 0.1)
        mean = section.getfloat('outlier_mean', 20.0)
        sd = section.getfloat('outlier_sd', 1.0)
        if kind == 'none':
            contamination = NoContamination()
        elif kind == 'y':
            contamination = YOutliers(frac, mean, sd)
        elif kind == 'x':
            contamination = XOutliers(frac, section.getint('n_cols', 10), mean, sd,
                                      section.getboolean('random_columns', False))
        else:
            raise InvalidScenario(f'Unknown contamination {kind!r}, expected none, y or x')
    except ValueError as e:
        raise InvalidScenario(f'Bad value in scenario file {path}: {e}')
    return SimScenario(contamination=contamination, **kwargs)


def scenario_to_dict(scenario: SimScenario) -> dict:
    out = {f.name: getattr(scenario, f.name) for f in fields(scenario) if f.name != 'contamination'}
    out['contamination'] = scenario.contamination.label()
    return out
