__version__ = '1.0.0'

from .datamodel import (Dataset, FitConfig, FittedModel, Initializer, RegularizationPath,
                        destandardize_coefficients, standardize)
from .weights import WeightScheme, compute_weights
from .mmfit import estimate, fit, initialize
from .selection import Hbic, KFoldCv, SelectionConfig, fit_path, hbic, lambda_grid
