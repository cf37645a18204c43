import os

config = {

    'DEBUG': bool(os.environ.get('DPDLASSO_DEBUG', False)),
    'LOGGING_LEVEL': os.environ.get('DPDLASSO_LOGGING_LEVEL', 'INFO'),
    'CONCURRENT_MAX_WORKERS': int(os.environ.get('DPDLASSO_THREADS', os.cpu_count() or 1)),

    # Regularization path
    'PATH_WARM_START_PREFIX': int(os.environ.get('DPDLASSO_PATH_WARM_START_PREFIX', 5)),
    'PATH_WARM_START_BLOCK': int(os.environ.get('DPDLASSO_PATH_WARM_START_BLOCK', 5)),

    # Coordinate descent
    'FULL_SWEEP_PERIOD': int(os.environ.get('DPDLASSO_FULL_SWEEP_PERIOD', 10)),

    # Scale estimation
    'SIGMA_FLOOR': float(os.environ.get('DPDLASSO_SIGMA_FLOOR', 1e-8)),
    # a fit whose scale drops below this fraction of the initial scale is treated as collapsed
    'SIGMA_COLLAPSE_RATIO': float(os.environ.get('DPDLASSO_SIGMA_COLLAPSE_RATIO', 1e-2)),
    'SINGULAR_INIT_SIGMA': float(os.environ.get('DPDLASSO_SINGULAR_INIT_SIGMA', 1e-4)),

    # Robust initializer
    'HUBER_C': float(os.environ.get('DPDLASSO_HUBER_C', 1.345)),
    'INIT_LAMBDA_RATIO': float(os.environ.get('DPDLASSO_INIT_LAMBDA_RATIO', 0.01)),
    'INIT_ITERATIONS': int(os.environ.get('DPDLASSO_INIT_ITERATIONS', 25)),
    # chi-square quantile above which rows are downweighted as leverage points
    'LEVERAGE_QUANTILE': float(os.environ.get('DPDLASSO_LEVERAGE_QUANTILE', 0.975)),

    'SCAD_A': float(os.environ.get('DPDLASSO_SCAD_A', 3.7)),
}
