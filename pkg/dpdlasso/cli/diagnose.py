import click
import numpy as np
import pandas as pd

from . import EXIT_OK, cli, exit_codes
from ..datamodel import load_model_json
from ..diagnostics import IfContext, if_beta1, if_sigma
from ..exceptions import DimensionMismatch
from ..logging import logger
from ..utils import atomic_open, read_csv_xy


def parse_point(ctx, param, value):
    try:
        return np.array([float(v) for v in value.split(',')])
    except ValueError:
        raise click.BadParameter(f'expected comma-separated numbers, got {value!r}')


@cli.command()
@click.option('--model', 'model_path', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Model JSON written by `fit` or `path`.')
@click.option('--y-t', type=float, required=True, help='Response of the contamination point.')
@click.option('--x-t', type=str, required=True, callback=parse_point,
              help='Covariates of the contamination point, comma-separated, raw scale.')
@click.option('--out', type=click.Path(dir_okay=False, writable=True), required=True, help='Influence CSV to write.')
@click.option('--data', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Design data for the second-moment matrix of the support columns.')
@click.option('--response', default='y', show_default=True)
@click.option('--lambda', 'lam', type=float, default=None, help='Penalty level (default: the model\'s).')
@click.option('--if-initial', type=click.Choice(['mdpde', 'zero']), default='mdpde', show_default=True,
              help='Influence of the initial estimator: unpenalized DPD estimator or zero.')
@click.option('--centering', type=click.Choice(['printed', 'fisher']), default='printed', show_default=True)
@exit_codes
def diagnose(model_path, y_t, x_t, out, data, response, lam, if_initial, centering):
    '''Evaluate the influence functions of a fitted model at one point.'''
    model, _ = load_model_json(model_path)
    if x_t.shape[0] != model.beta.shape[0]:
        raise DimensionMismatch(f'--x-t has {x_t.shape[0]} values, the model has {model.beta.shape[0]} coefficients')
    lam = model.lam if lam is None else lam
    support = list(model.support)
    initial = np.zeros(len(support)) if if_initial == 'zero' else None
    # the model intercept is folded into the response of the point
    y_centered = y_t - model.intercept

    if data is None:
        logger.warning('No --data given, using the identity as the second-moment matrix of the support')
        if_ctx = IfContext(model.beta, model.sigma, model.gamma, np.eye(len(support)), tuple(support), initial)
    else:
        _, X, _ = read_csv_xy(data, response)
        if X.shape[1] != model.beta.shape[0]:
            raise DimensionMismatch(f'--data has {X.shape[1]} covariates, the model has {model.beta.shape[0]}')
        if_ctx = IfContext.at_model(model.beta, model.sigma, model.gamma, X, support, initial)

    rows = [{'target': 'beta', 'index': j + 1, 'influence': v}
            for j, v in zip(support, if_beta1(if_ctx, y_centered, x_t, lam))]
    rows.append({'target': 'sigma', 'index': 0,
                 'influence': if_sigma(model.sigma, model.gamma, y_centered, x_t, model.beta, centering)})
    with atomic_open(out) as f:
        pd.DataFrame.from_records(rows, columns=['target', 'index', 'influence']).to_csv(f, index=False,
                                                                                       float_format='%.10g')
    click.echo(f'{len(rows)} influence values written to {out}')
    return EXIT_OK
