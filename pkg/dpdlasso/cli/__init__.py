import functools

import click

from .. import __version__
from ..config import config
from ..datamodel import FitConfig, Initializer
from ..exceptions import DpdLassoError
from ..logging import logger
from ..selection import Hbic, KFoldCv, SelectionConfig
from ..weights import WeightScheme

EXIT_OK = 0
EXIT_DATA_ERROR = 2
EXIT_NOT_CONVERGED = 3

INITIALIZERS = {'huber': Initializer.HUBER_LASSO_IRLS, 'ols': Initializer.OLS_LASSO}


@click.group()
@click.version_option(__version__, prog_name='dpdlasso')
@click.option('--threads', type=click.IntRange(min=1), default=config['CONCURRENT_MAX_WORKERS'],
              show_default=True, help='Worker threads for paths, folds and replications.')
@click.pass_context
def cli(ctx, threads):
    '''Robust sparse regression with the adaptively weighted DPD-LASSO.'''
    ctx.obj = {'threads': threads}


def exit_codes(f):
    '''
    Map library errors to exit code 2; commands return 3 when a model did
    not converge.
    '''
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            code = f(*args, **kwargs)
        except DpdLassoError as e:
            logger.debug(f'{f.__name__} failed: {e!r}')
            click.echo(f'Error: {e}', err=True)
            code = EXIT_DATA_ERROR
        click.get_current_context().exit(code or EXIT_OK)
    return wrapper


def weight_scheme(kind: str, scad_a: float) -> WeightScheme:
    return {
        'unit': WeightScheme.unit,
        'adaptive': WeightScheme.hard_threshold,
        'scad': lambda: WeightScheme.scad(scad_a),
    }[kind]()


def fit_options(f):
    '''Options shared by every command that fits models.'''
    options = [
        click.option('--scad-a', type=float, default=config['SCAD_A'], show_default=True,
                     help='SCAD shape parameter (> 2).'),
        click.option('--freeze-weights', is_flag=True, help='Keep adaptive weights at the initial estimate.'),
        click.option('--scad-lambda', type=float, default=None, help='Fixed SCAD threshold (default: follow lambda).'),
        click.option('--initializer', type=click.Choice(sorted(INITIALIZERS)), default='huber', show_default=True),
        click.option('--epsilon-outer', type=float, default=1e-6, show_default=True),
        click.option('--epsilon-inner', type=float, default=1e-8, show_default=True),
        click.option('--max-outer-iter', type=click.IntRange(min=1), default=100, show_default=True),
        click.option('--max-inner-iter', type=click.IntRange(min=1), default=1000, show_default=True),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def selection_options(f):
    options = [
        click.option('--n-lambdas', type=click.IntRange(min=1), default=50, show_default=True),
        click.option('--lambda-min-ratio', type=float, default=1e-3, show_default=True),
        click.option('--criterion', type=click.Choice(['hbic', 'cv']), default='hbic', show_default=True),
        click.option('--folds', type=click.IntRange(min=2), default=5, show_default=True),
        click.option('--cv-loss', type=click.Choice(['dpd', 'trimmed']), default='dpd', show_default=True),
        click.option('--trim', type=float, default=0.1, show_default=True),
        click.option('--seed', type=int, default=0, show_default=True),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def build_fit_config(gamma, weights, scad_a, freeze_weights, scad_lambda, initializer, epsilon_outer,
                     epsilon_inner, max_outer_iter, max_inner_iter, lam=0.0) -> FitConfig:
    try:
        return FitConfig(
            gamma=gamma,
            lam=lam,
            weight_scheme=weight_scheme(weights, scad_a),
            initializer=INITIALIZERS[initializer],
            epsilon_outer=epsilon_outer,
            epsilon_inner=epsilon_inner,
            max_outer_iter=max_outer_iter,
            max_inner_iter=max_inner_iter,
            freeze_weights=freeze_weights,
            scad_lambda=scad_lambda,
        )
    except ValueError as e:
        raise click.BadParameter(str(e))


def build_selection_config(n_lambdas, lambda_min_ratio, criterion, folds, cv_loss, trim, seed):
    try:
        rule = Hbic() if criterion == 'hbic' else KFoldCv(folds, cv_loss, trim)
        return SelectionConfig(n_lambdas, lambda_min_ratio, rule, seed)
    except ValueError as e:
        raise click.BadParameter(str(e))


from . import fit, path, simulate, diagnose
