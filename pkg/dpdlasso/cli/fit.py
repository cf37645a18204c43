from dataclasses import replace

import click

from . import EXIT_DATA_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, build_fit_config, build_selection_config, cli, exit_codes, \
    fit_options, selection_options
from ..datamodel import save_model_json, standardize
from ..logging import logger
from ..mmfit import estimate
from ..selection import fit_path
from ..utils import read_csv_xy


@cli.command()
@click.option('--data', type=click.Path(exists=True, dir_okay=False), required=True, help='Input CSV with a header row.')
@click.option('--response', default='y', show_default=True, help='Name of the response column.')
@click.option('--out', type=click.Path(dir_okay=False, writable=True), required=True, help='Model JSON to write.')
@click.option('--gamma', type=float, default=0.5, show_default=True)
@click.option('--lambda', 'lam', type=float, default=None, help='Penalty level; selected on a path when omitted.')
@click.option('--weights', type=click.Choice(['unit', 'adaptive', 'scad']), default='adaptive', show_default=True)
@fit_options
@selection_options
@click.pass_context
@exit_codes
def fit(ctx, data, response, out, gamma, lam, weights, scad_a, freeze_weights, scad_lambda, initializer,
        epsilon_outer, epsilon_inner, max_outer_iter, max_inner_iter, **selection):
    '''Fit one model and write it as JSON.'''
    cfg = build_fit_config(gamma, weights, scad_a, freeze_weights, scad_lambda, initializer, epsilon_outer,
                           epsilon_inner, max_outer_iter, max_inner_iter)
    y, X, columns = read_csv_xy(data, response)
    ds = standardize(y, X, columns)
    logger.info(f'fit: n={ds.n} p={ds.p} gamma={gamma} weights={cfg.weight_scheme.label()}')

    if lam is None:
        path = fit_path(ds, cfg, build_selection_config(**selection), ctx.obj['threads'])
        model = path.selected
        if model is None:
            click.echo('Error: the fit at the selected lambda failed, no model written', err=True)
            return EXIT_DATA_ERROR
    else:
        try:
            cfg = replace(cfg, lam=lam)
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint='--lambda')
        model = estimate(ds, cfg)

    save_model_json(model, out, columns)
    click.echo(f'MS={model.ms} sigma={model.sigma:.6g} lambda={model.lam:.6g} converged={model.converged}')
    logger.info(f'fit: model written to {out}')
    return EXIT_OK if model.converged else EXIT_NOT_CONVERGED
