import numpy as np
import pandas as pd
import pytest

from dpdlasso.datamodel import FitConfig, standardize
from dpdlasso.exceptions import DimensionMismatch, InvalidScenario, PTooSmall
from dpdlasso.selection import SelectionConfig, fit_path
from dpdlasso.simharness import (CONTAMINATION_STREAM, METRIC_NAMES, NoContamination, SimScenario, StudyMethod,
                                 XOutliers, YOutliers, contaminate, generate, load_scenario, ls_baselines,
                                 method_name, metrics, run_study, scenario_to_dict, split_study, toeplitz_rows,
                                 true_beta)
from dpdlasso.utils import rng_stream
from dpdlasso.weights import WeightScheme


def test_setting_a():
    np.testing.assert_array_equal(true_beta('A', 6), [3, 1.5, 0, 0, 2, 0])


def test_setting_b():
    beta = true_beta('B', 80)
    assert set(np.flatnonzero(beta) + 1) == {1, 2, 5, 21, 22, 25, 41, 42, 45}
    assert beta[24] == 2.0
    with pytest.raises(PTooSmall):
        true_beta('B', 59)
    with pytest.raises(PTooSmall):
        SimScenario(p=4)


def test_toeplitz_covariance():
    X = toeplitz_rows(np.random.default_rng(0), 400000, 4, 0.5)
    expected = 0.5 ** np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
    assert expected[0, 2] == 0.25
    assert np.abs(np.cov(X, rowvar=False) - expected).max() < 0.01


def test_generate_is_deterministic():
    scenario = SimScenario(n=30, p=10, seed=4)
    a, b = generate(scenario, 3), generate(scenario, 3)
    np.testing.assert_array_equal(a.train.X, b.train.X)
    np.testing.assert_array_equal(a.test.y, b.test.y)
    assert not np.array_equal(a.train.y, generate(scenario, 4).train.y)
    assert a.train.n == 30 and a.test.n == scenario.n_test


def test_no_contamination_is_identity():
    scenario = SimScenario(n=40, p=10)
    train = generate(scenario, 0).train
    assert contaminate(train, scenario, rng_stream(0, 0, CONTAMINATION_STREAM)) is train


def test_response_outliers():
    scenario = SimScenario(n=100, p=10, contamination=YOutliers(0.1))
    train = generate(scenario, 0).train
    dirty = contaminate(train, scenario, rng_stream(0, 0, CONTAMINATION_STREAM))
    changed = dirty.y != train.y
    assert changed.sum() == 10
    assert (dirty.y - train.y)[changed].min() > 15.0
    np.testing.assert_array_equal(dirty.X, train.X)


@pytest.mark.parametrize('random_columns', [False, True])
def test_covariate_outliers(random_columns):
    scenario = SimScenario(n=100, p=30, contamination=XOutliers(0.1, random_columns=random_columns))
    train = generate(scenario, 0).train
    dirty = contaminate(train, scenario, rng_stream(0, 0, CONTAMINATION_STREAM))
    changed = dirty.X != train.X
    assert changed.any(axis=1).sum() == 10
    assert changed.any(axis=0).sum() == 10
    if not random_columns:
        assert changed[:, :10].any(axis=0).all()
    np.testing.assert_array_equal(dirty.y, train.y)


def test_scenario_validation():
    with pytest.raises(InvalidScenario):
        SimScenario(setting='C')
    with pytest.raises(InvalidScenario):
        SimScenario(contamination=YOutliers(1.5))
    with pytest.raises(InvalidScenario):
        SimScenario(rho=1.0)
    with pytest.raises(InvalidScenario):
        SimScenario(n_test=1)


def test_metrics_of_the_truth():
    beta0 = true_beta('A', 10)
    X = np.random.default_rng(0).normal(size=(20, 10))
    row = metrics(beta0, 0.5, beta0, 0.5, (X @ beta0, X))
    assert row.tp == row.tn == 1.0
    assert row.mses == row.msen == row.ee_sigma == row.aprb == 0.0
    assert row.ms == 3


def test_metrics_definitions():
    beta0 = true_beta('A', 10)
    beta_hat = beta0 + np.array([0.1, -0.1, 0, 0, 0.1, 0, 0, 0, 0, 0])
    X = np.zeros((4, 10))
    row = metrics(beta_hat, 0.7, beta0, 0.5, (np.ones(4), X))
    assert row.mses == pytest.approx(0.01)
    assert row.ee_sigma == pytest.approx(0.2)
    assert row.aprb == pytest.approx(1.0)

    partial = np.array([3.0, 1.5, 0, 0, 0, 0.2, 0, 0, 0, 0])
    row = metrics(partial, 0.5, beta0, 0.5, (np.ones(4), X))
    assert row.tp == pytest.approx(2 / 3)
    assert row.tn == pytest.approx(6 / 7)
    assert row.ms == pytest.approx(row.tp * 3 + (1 - row.tn) * 7)
    assert row.msen == pytest.approx(0.04 / 7)

    with pytest.raises(DimensionMismatch):
        metrics(partial[:5], 0.5, beta0, 0.5, (np.ones(4), X))


def test_method_names():
    assert method_name(FitConfig(gamma=0.3, weight_scheme=WeightScheme.hard_threshold())) == 'Ad-DPD-LASSO gamma=0.3'
    assert method_name(FitConfig(gamma=0.0)) == 'LS-LASSO'
    assert [m.name for m in ls_baselines()] == ['LS-LASSO', 'Ad-LS-LASSO']


def small_methods():
    sel = SelectionConfig(n_lambdas=6)
    return [StudyMethod.from_config(FitConfig(gamma=0.3, weight_scheme=WeightScheme.hard_threshold()), sel),
            StudyMethod.from_config(FitConfig(gamma=0.5), sel)]


def test_single_replication_report():
    scenario = SimScenario(n=40, p=8, n_replications=1, seed=9, contamination=YOutliers(0.1))
    methods = small_methods()
    report = run_study(scenario, methods, threads=1)

    draw = generate(scenario, 0)
    train = contaminate(draw.train, scenario, rng_stream(9, 0, CONTAMINATION_STREAM))
    model = fit_path(standardize(*train.raw()), methods[0].fit_config, methods[0].selection_config, 1).selected
    expected = metrics(model.beta, model.sigma, draw.beta0, draw.sigma0, draw.test.raw(), model.intercept,
                       model.support)
    row = report.row(methods[0].name)
    for name in METRIC_NAMES:
        assert row[name] == pytest.approx(getattr(expected, name))
        assert row[f'{name}_se'] == 0.0
    assert row['n_ok'] == 1 and row['n_failed'] == 0


def test_study_is_reproducible_across_thread_counts(tmp_path):
    scenario = SimScenario(n=30, p=8, n_replications=3, seed=2)
    a = run_study(scenario, small_methods(), threads=1)
    b = run_study(scenario, small_methods(), threads=3)
    pd.testing.assert_frame_equal(a.table, b.table)

    path = tmp_path / 'report.csv'
    a.to_csv(path)
    table = pd.read_csv(path)
    assert list(table['method']) == [m.name for m in small_methods()]
    assert {'tp', 'tp_se', 'n_ok', 'n_failed'} <= set(table.columns)


def test_split_study():
    y_raw, X_raw = generate(SimScenario(n=60, p=8), 0).train.raw()
    taus = split_study(y_raw, X_raw, small_methods()[:1], n_test=15, n_repeats=3, seed=1, threads=2)
    assert taus.shape == (3, 1)
    assert (taus.to_numpy() > 0).all()
    with pytest.raises(InvalidScenario):
        split_study(y_raw, X_raw, small_methods(), n_test=59)


def test_load_scenario(tmp_path):
    path = tmp_path / 'scenario.ini'
    path.write_text('n = 40\np = 12\nsetting = A\nn_replications = 2\ncontamination = x\nfrac = 0.05\n'
                    'n_cols = 3\nrandom_columns = yes\n')
    scenario = load_scenario(path)
    assert (scenario.n, scenario.p, scenario.n_replications) == (40, 12, 2)
    assert scenario.contamination == XOutliers(0.05, 3, 20.0, 1.0, True)
    assert scenario_to_dict(scenario)['contamination'] == 'x(0.05)'

    path.write_text('n = 40\nbudget = 3\n')
    with pytest.raises(InvalidScenario):
        load_scenario(path)
    path.write_text('contamination = z\n')
    with pytest.raises(InvalidScenario):
        load_scenario(path)
    path.write_text('n = forty\n')
    with pytest.raises(InvalidScenario):
        load_scenario(path)
    path.write_text('')
    assert load_scenario(path).contamination == NoContamination()


DESK = dict(n=100, p=50, n_replications=50, seed=2024)


def adaptive(gamma, sel=None):
    return StudyMethod.from_config(FitConfig(gamma=gamma, weight_scheme=WeightScheme.hard_threshold()), sel)


@pytest.mark.slow
def test_desk_setting_a_clean():
    report = run_study(SimScenario(**DESK), [adaptive(0.3)])
    row = report.row(adaptive(0.3).name)
    assert row['n_ok'] == 50
    assert 3.0 <= row['ms'] <= 3.8
    assert row['ee_sigma'] < 0.10
    assert row['tp'] >= 0.95


@pytest.mark.slow
def test_desk_response_outliers():
    ls = StudyMethod.from_config(FitConfig(gamma=0.0))
    robust = adaptive(0.5)
    report = run_study(SimScenario(contamination=YOutliers(0.1), **DESK), [ls, robust])
    robust_row, ls_row = report.row(robust.name), report.row(ls.name)
    assert robust_row['tp'] >= 0.98
    assert robust_row['tp'] - ls_row['tp'] >= 0.15
    assert robust_row['ee_sigma'] < 0.15
    assert ls_row['ee_sigma'] > 1.0


@pytest.mark.slow
def test_desk_covariate_outliers_leave_robust_fit_unchanged():
    method = adaptive(0.3)
    clean = run_study(SimScenario(**DESK), [method]).row(method.name)
    dirty = run_study(SimScenario(contamination=XOutliers(0.1), **DESK), [method]).row(method.name)
    assert abs(clean['mses'] - dirty['mses']) < 0.01


@pytest.mark.slow
def test_desk_scad_weights():
    scad = StudyMethod.from_config(FitConfig(gamma=0.3, weight_scheme=WeightScheme.scad()))
    hard = adaptive(0.3)
    report = run_study(SimScenario(**DESK), [scad, hard])
    assert report.row(scad.name)['mses'] <= 2 * report.row(hard.name)['mses']
    assert report.row(scad.name)['tp'] == 1.0
