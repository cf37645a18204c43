import os
import tempfile
from contextlib import contextmanager

import numpy as np
import pandas as pd
from scipy.stats import median_abs_deviation

from .exceptions import MissingColumn, NonFiniteInput


def mad_sigma(x) -> float:
    """Normal-consistent median absolute deviation (1.4826 * median|x - median x|)."""
    return float(median_abs_deviation(np.asarray(x, dtype=float), scale='normal'))


def rng_stream(seed: int, rep_index: int = 0, stream: int = 0) -> np.random.Generator:
    '''
    Counter-based generator keyed by (seed, rep_index, stream)
    '''
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, rep_index, stream])))


@contextmanager
def atomic_open(path, mode='w'):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.', suffix='.tmp')
    try:
        with os.fdopen(fd, mode) as f:
            yield f
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def atomic_write_text(path, text: str):
    with atomic_open(path) as f:
        f.write(text)


def read_csv_xy(path, response: str):
    """
    Read a headered CSV; `response` names y, remaining numeric columns form X.

    Returns (y, X, column_names).
    """
    frame = pd.read_csv(path)
    if response not in frame.columns:
        raise MissingColumn(response)
    y = frame[response]
    features = frame.drop(columns=[response]).select_dtypes(include='number')
    if features.shape[1] == 0:
        raise NonFiniteInput(f'No numeric covariate columns in {path}')
    if not np.issubdtype(y.dtype, np.number):
        raise NonFiniteInput(f'Response column {response!r} is not numeric')
    return y.to_numpy(dtype=float), features.to_numpy(dtype=float), list(features.columns)
