'''
Penalty weight functions w(|b|) evaluated at an initial estimate.

A weight of +inf marks a coordinate as excluded (pinned at zero). Arithmetic
never touches those entries: callers split them off with `split_weights`.
'''
from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np

from .config import config


@dataclass(frozen=True)
class WeightScheme:
    kind: Literal['unit', 'adaptive', 'scad'] = 'unit'
    a: float = config['SCAD_A']
    lambda_n: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ('unit', 'adaptive', 'scad'):
            raise ValueError(f'Unknown weight scheme: {self.kind}')
        if self.kind == 'scad':
            if not self.a > 2:
                raise ValueError(f'SCAD requires a > 2, got {self.a}')
            if self.lambda_n is not None and not self.lambda_n > 0:
                raise ValueError(f'SCAD requires lambda_n > 0, got {self.lambda_n}')

    @classmethod
    def unit(cls) -> 'WeightScheme':
        return cls('unit')

    @classmethod
    def hard_threshold(cls) -> 'WeightScheme':
        return cls('adaptive')

    @classmethod
    def scad(cls, a: float = config['SCAD_A'], lambda_n: Optional[float] = None) -> 'WeightScheme':
        return cls('scad', a, lambda_n)

    @property
    def is_adaptive(self) -> bool:
        return self.kind != 'unit'

    def with_lambda(self, lam: float) -> 'WeightScheme':
        if self.kind != 'scad':
            return self
        return replace(self, lambda_n=lam)

    def label(self) -> str:
        if self.kind == 'scad':
            return f'scad(a={self.a:g})'
        return self.kind


def scad_weight(t, a: float, lambda_n: float):
    t = np.abs(np.asarray(t, dtype=float))
    tail = np.maximum(a * lambda_n - t, 0.0) / ((a - 1) * lambda_n)
    return np.where(t <= lambda_n, 1.0, tail)


def compute_weights(scheme: WeightScheme, beta_init) -> np.ndarray:
    beta_init = np.asarray(beta_init, dtype=float)
    if scheme.kind == 'unit':
        return np.ones_like(beta_init)
    if scheme.kind == 'adaptive':
        magnitude = np.abs(beta_init)
        w = np.full_like(beta_init, np.inf)
        nonzero = magnitude != 0
        w[nonzero] = 1.0 / magnitude[nonzero]
        return w
    if scheme.lambda_n is None:
        raise ValueError('SCAD weights need lambda_n; tie it to the path with with_lambda()')
    return scad_weight(beta_init, scheme.a, scheme.lambda_n)


def split_weights(w):
    """Return (finite weights with excluded entries zeroed, excluded mask)."""
    w = np.asarray(w, dtype=float)
    excluded = np.isinf(w)
    finite = np.where(excluded, 0.0, w)
    return finite, excluded


def penalty(lam: float, w, beta) -> float:
    finite, excluded = split_weights(w)
    return float(lam * np.sum(finite[~excluded] * np.abs(np.asarray(beta)[~excluded])))
