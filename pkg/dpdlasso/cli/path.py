import time

import click
import numpy as np
import pandas as pd

from . import EXIT_NOT_CONVERGED, EXIT_OK, build_fit_config, build_selection_config, cli, exit_codes, \
    fit_options, metrics, selection_options
from ..datamodel import save_model_json, standardize
from ..logging import logger
from ..selection import fit_path
from ..utils import atomic_open, read_csv_xy


def path_table(path) -> pd.DataFrame:
    rows = []
    for lam, score, model in zip(path.lambdas, path.hbic, path.models):
        rows.append({
            'lambda': lam,
            'hbic': score,
            'ms': np.nan if model is None else model.ms,
            'sigma': np.nan if model is None else model.sigma,
            'converged': False if model is None else model.converged,
        })
    table = pd.DataFrame.from_records(rows, columns=['lambda', 'hbic', 'ms', 'sigma', 'converged'])
    table['ms'] = table['ms'].astype('Int64')
    if path.cv_error is not None:
        table['cv_error'] = path.cv_error
    return table


@cli.command()
@click.option('--data', type=click.Path(exists=True, dir_okay=False), required=True, help='Input CSV with a header row.')
@click.option('--response', default='y', show_default=True, help='Name of the response column.')
@click.option('--out', type=click.Path(dir_okay=False, writable=True), required=True, help='Path CSV to write.')
@click.option('--model-out', type=click.Path(dir_okay=False, writable=True), default=None,
              help='Also write the selected model as JSON.')
@click.option('--gamma', type=float, default=0.5, show_default=True)
@click.option('--weights', type=click.Choice(['unit', 'adaptive', 'scad']), default='adaptive', show_default=True)
@click.option('--metrics-file', type=click.Path(dir_okay=False, writable=True), default=None,
              help='Write run gauges in the prometheus textfile format.')
@fit_options
@selection_options
@click.pass_context
@exit_codes
def path(ctx, data, response, out, model_out, gamma, weights, metrics_file, scad_a, freeze_weights, scad_lambda,
         initializer, epsilon_outer, epsilon_inner, max_outer_iter, max_inner_iter, **selection):
    '''Fit the regularization path and write one CSV row per lambda.'''
    start = time.time()
    cfg = build_fit_config(gamma, weights, scad_a, freeze_weights, scad_lambda, initializer, epsilon_outer,
                           epsilon_inner, max_outer_iter, max_inner_iter)
    sel = build_selection_config(**selection)
    y, X, columns = read_csv_xy(data, response)
    ds = standardize(y, X, columns)
    logger.info(f'path: n={ds.n} p={ds.p} gamma={gamma} weights={cfg.weight_scheme.label()} '
                f'criterion={sel.criterion.label()}')

    result = fit_path(ds, cfg, sel, ctx.obj['threads'])
    with atomic_open(out) as f:
        path_table(result).to_csv(f, index=False, float_format='%.10g')

    selected = result.selected
    if selected is not None and model_out:
        save_model_json(selected, model_out, columns)
    if metrics_file:
        metrics.record_path(result, time.time() - start)
        metrics.write(metrics_file)

    click.echo(f'selected lambda={result.lambdas[result.selected_index]:.6g} '
               f'MS={selected.ms if selected else "NA"} rows={len(result.lambdas)}')
    logger.info(f'path: {len(result.lambdas)} rows written to {out} in {time.time() - start:.1f}s')
    return EXIT_OK if selected is not None and selected.converged else EXIT_NOT_CONVERGED
