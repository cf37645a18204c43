'''
Batch-run gauges, written in the node-exporter textfile format.
'''
from prometheus_client import CollectorRegistry, Gauge, write_to_textfile

registry = CollectorRegistry()

dpdlasso_fits = Gauge('dpdlasso_fits', 'Models fitted in the last run', registry=registry)
dpdlasso_fits_not_converged = Gauge('dpdlasso_fits_not_converged', 'Fitted models flagged as not converged',
                                    registry=registry)
dpdlasso_failures = Gauge('dpdlasso_failures', 'Failed fits or replications in the last run', registry=registry)
dpdlasso_lambdas = Gauge('dpdlasso_lambdas', 'Lambda grid length of the last path', registry=registry)
dpdlasso_run_seconds = Gauge('dpdlasso_run_seconds', 'Wall time of the last run', ('command',), registry=registry)


def record_path(path, seconds: float):
    fitted = [m for m in path.models if m is not None]
    dpdlasso_fits.set(len(fitted))
    dpdlasso_fits_not_converged.set(sum(not m.converged for m in fitted))
    dpdlasso_failures.set(len(path.models) - len(fitted))
    dpdlasso_lambdas.set(len(path.lambdas))
    dpdlasso_run_seconds.labels(command='path').set(seconds)


def record_study(report, seconds: float):
    table = report.table
    dpdlasso_fits.set(int(table['n_ok'].sum()))
    dpdlasso_failures.set(int(table['n_failed'].sum()))
    dpdlasso_run_seconds.labels(command='simulate').set(seconds)


def write(path):
    write_to_textfile(path, registry)
