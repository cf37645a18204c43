import time
from dataclasses import replace

import click

from . import EXIT_OK, build_fit_config, cli, exit_codes, fit_options, metrics
from ..logging import logger
from ..selection import SelectionConfig
from ..simharness import StudyMethod, load_scenario, ls_baselines, run_study, scenario_to_dict


def parse_gammas(ctx, param, value):
    try:
        gammas = [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise click.BadParameter(f'expected a comma-separated list of numbers, got {value!r}')
    if not gammas or any(g < 0 for g in gammas):
        raise click.BadParameter('need at least one gamma, all >= 0')
    return gammas


@cli.command()
@click.option('--scenario', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Scenario file of key = value lines.')
@click.option('--out', type=click.Path(dir_okay=False, writable=True), required=True, help='Report CSV to write.')
@click.option('--gamma', 'gammas', default='0.3', show_default=True, callback=parse_gammas,
              help='Comma-separated gamma values to sweep.')
@click.option('--weights', 'weight_kinds', type=click.Choice(['unit', 'adaptive', 'scad']), multiple=True,
              default=('adaptive',), show_default=True, help='Repeat to compare several schemes.')
@click.option('--ls-baselines', 'with_baselines', is_flag=True, help='Add the LS-LASSO and Ad-LS-LASSO baselines.')
@click.option('--replications', type=click.IntRange(min=1), default=None, help='Override n_replications.')
@click.option('--seed', type=int, default=None, help='Override the scenario seed.')
@click.option('--n-lambdas', type=click.IntRange(min=1), default=50, show_default=True)
@click.option('--lambda-min-ratio', type=float, default=1e-3, show_default=True)
@click.option('--metrics-file', type=click.Path(dir_okay=False, writable=True), default=None,
              help='Write run gauges in the prometheus textfile format.')
@fit_options
@click.pass_context
@exit_codes
def simulate(ctx, scenario, out, gammas, weight_kinds, with_baselines, replications, seed, n_lambdas,
             lambda_min_ratio, metrics_file, scad_a, freeze_weights, scad_lambda, initializer, epsilon_outer,
             epsilon_inner, max_outer_iter, max_inner_iter):
    '''Run a simulation study and write one CSV row per method.'''
    start = time.time()
    study = load_scenario(scenario)
    if replications is not None:
        study = replace(study, n_replications=replications)
    if seed is not None:
        study = replace(study, seed=seed)
    try:
        sel = SelectionConfig(n_lambdas, lambda_min_ratio)
    except ValueError as e:
        raise click.BadParameter(str(e))

    methods = ls_baselines(sel) if with_baselines else []
    for kind in weight_kinds:
        for gamma in gammas:
            cfg = build_fit_config(gamma, kind, scad_a, freeze_weights, scad_lambda, initializer, epsilon_outer,
                                   epsilon_inner, max_outer_iter, max_inner_iter)
            methods.append(StudyMethod.from_config(cfg, sel))
    logger.info(f'simulate: {scenario_to_dict(study)} with {len(methods)} methods')

    report = run_study(study, methods, ctx.obj['threads'])
    report.to_csv(out)
    if metrics_file:
        metrics.record_study(report, time.time() - start)
        metrics.write(metrics_file)

    click.echo(f'{len(methods)} methods x {study.n_replications} replications written to {out}')
    logger.info(f'simulate: done in {time.time() - start:.1f}s')
    return EXIT_OK
