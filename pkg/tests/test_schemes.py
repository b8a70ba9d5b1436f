"""Tests for scheme orchestration and report files."""

import os

import numpy as np
import pandas as pd
import pytest

from alpha_discovery.Alpha_Discovery_DSL import CLASSICAL_FEATURES
from alpha_discovery.Alpha_Discovery_Diversity import DiversityConfig
from alpha_discovery.Alpha_Discovery_Errors import ConfigError, DataError
from alpha_discovery.Alpha_Discovery_GP import GpConfig
from alpha_discovery.Alpha_Discovery_Network import TrainConfig
from alpha_discovery.Alpha_Discovery_Schemes import FAILURE_COLUMNS, \
    FAILURES_FILE, REPORT_COLUMNS, ExperimentData, SchemeConfig, \
    derived_seed, evaluate_features, feature_set_diversity, \
    load_gp_teachers, run_scheme, teacher_specs, write_scheme_outputs, \
    write_summary

SMALL_GP = GpConfig(population_size=20, generations=1, max_depth=3,
                    elitism=2)
SMALL_NET = TrainConfig(batch_days=5, batches_per_epoch=2, max_epochs=2,
                        patience=1, pretrain_epochs=2,
                        random_pretrain_epochs=1, hidden_sizes=(8, 4))


def _lines(path):
    with open(path) as f:
        return f.read().splitlines()


@pytest.fixture(scope='module')
def data(panel, ds):
    return ExperimentData(panel, ds)


@pytest.fixture(scope='module')
def scheme_a(data):
    return run_scheme(SchemeConfig('A', n_features=4, seed=2), data,
                      gp_cfg=SMALL_GP)


class TestSeeds:

    def test_derived_seeds(self):
        assert derived_seed(7, 'B', 3) == derived_seed(7, 'B', 3)
        seeds = {derived_seed(7, 'A'), derived_seed(7, 'B'),
                 derived_seed(7, 'B', 1), derived_seed(8, 'B'),
                 derived_seed(7, 'diversity')}
        assert len(seeds) == 5


class TestTeachers:

    def test_classical_round_robin(self):
        specs = teacher_specs(SchemeConfig('B', n_features=10,
                                           teacher_source='classical'))
        names = list(CLASSICAL_FEATURES)
        assert specs[:8] == [('classical', n) for n in names]
        assert specs[8:] == [('classical', names[0]),
                             ('classical', names[1])]

    def test_gp_teachers_cycle(self):
        specs = teacher_specs(SchemeConfig('B', n_features=3),
                              ['close', 'open'])
        assert specs == [('expr', 'close'), ('expr', 'open'),
                         ('expr', 'close')]

    def test_gp_teachers_required(self):
        with pytest.raises(DataError):
            teacher_specs(SchemeConfig('B', n_features=3))

    def test_random_teachers(self):
        specs = teacher_specs(SchemeConfig('C', n_features=2,
                                           random_teacher='network'))
        assert specs == [('random', 'network')] * 2

    def test_missing_scheme_a_output(self, tmp_path):
        with pytest.raises(DataError) as err:
            load_gp_teachers(str(tmp_path))
        assert 'run A' in str(err.value)


class TestSchemeA:

    def test_report(self, scheme_a):
        report = scheme_a.report
        assert report.scheme == 'A'
        assert [row.feature_id for row in report.rows] == \
            ['A001', 'A002', 'A003', 'A004']
        assert report.failures == 0
        assert report.good_count == sum(row.test_ic >= 0.05
                                        for row in report.rows)
        assert report.diversity.k == 2
        assert len(scheme_a.gp_features) == 4

    def test_seeded(self, data, scheme_a):
        again = run_scheme(SchemeConfig('A', n_features=4, seed=2), data,
                           gp_cfg=SMALL_GP)
        assert [ind.rpn for ind in again.gp_features] == \
            [ind.rpn for ind in scheme_a.gp_features]

    def test_outputs(self, tmp_path, data, scheme_a):
        out = str(tmp_path)
        directory = write_scheme_outputs(scheme_a, data.panel, out)
        frame = pd.read_csv(os.path.join(directory, 'scheme_report.csv'))
        assert list(frame.columns) == ['scheme'] + REPORT_COLUMNS
        assert sorted(os.listdir(os.path.join(directory, 'features'))) == \
            ['A001.csv', 'A002.csv', 'A003.csv', 'A004.csv']
        assert os.path.exists(os.path.join(directory, 'gp_features.csv'))
        assert not os.path.exists(os.path.join(directory, 'timing.txt'))
        teachers = load_gp_teachers(out)
        assert sorted(teachers) == sorted(ind.rpn
                                          for ind in scheme_a.gp_features)

        with open(os.path.join(directory, FAILURES_FILE)) as f:
            assert f.read() == 'feature_id,error\n'

        summary = _lines(write_summary(out))
        assert summary[0].startswith('Scheme')
        assert summary[1].split()[:3] == ['A', '4', '0']
        assert summary[1].endswith('-')

    def test_recorded_time(self, tmp_path, data, scheme_a):
        out = str(tmp_path)
        write_scheme_outputs(scheme_a, data.panel, out, record_time=True)
        summary = _lines(write_summary(out))
        assert not summary[1].endswith('-')

    def test_empty_summary(self, tmp_path):
        assert write_summary(str(tmp_path)) is None


class TestNetworkSchemes:

    def test_scheme_c(self, tmp_path, data):
        cfg = SchemeConfig('C', n_features=2, seed=1)
        result = run_scheme(cfg, data, train_cfg=SMALL_NET)
        assert [row.feature_id for row in result.report.rows] == \
            ['C001', 'C002']
        assert set(result.traces) == {'C001', 'C002'}
        directory = write_scheme_outputs(result, data.panel, str(tmp_path))
        trace = pd.read_csv(os.path.join(directory, 'contrib_trace.csv'))
        assert set(trace['feature_id']) == {'C001', 'C002'}

    def test_scheme_b_classical(self, data):
        cfg = SchemeConfig('B', n_features=2, teacher_source='classical')
        result = run_scheme(cfg, data, train_cfg=SMALL_NET)
        assert len(result.features) == 2
        assert result.gp_features == []

    def test_failed_feature_is_reported(self, tmp_path, data):
        cfg = SchemeConfig('B', n_features=2)
        teachers = ['close delay_30 delay_30 delay_30', 'close']
        result = run_scheme(cfg, data, train_cfg=SMALL_NET, teachers=teachers)
        assert result.report.failures == 1
        assert [f.name for f in result.features] == ['B002']
        assert result.report.diversity.mean == 0.0

        out = str(tmp_path)
        directory = write_scheme_outputs(result, data.panel, out)
        failed = pd.read_csv(os.path.join(directory, FAILURES_FILE))
        assert list(failed.columns) == FAILURE_COLUMNS
        assert list(failed['feature_id']) == ['B001']
        assert failed['error'].iloc[0]
        summary = _lines(write_summary(out))
        assert summary[0].split()[:3] == ['Scheme', 'Features', 'Failed']
        assert summary[1].split()[:3] == ['B', '1', '1']

    def test_all_failed(self, data):
        cfg = SchemeConfig('B', n_features=1)
        with pytest.raises(DataError):
            run_scheme(cfg, data, train_cfg=SMALL_NET,
                       teachers=['close delay_30 delay_30 delay_30'])

    def test_workers_do_not_change_results(self, data):
        cfg = SchemeConfig('C', n_features=2, seed=4)
        one = run_scheme(cfg, data, train_cfg=SMALL_NET)
        two = run_scheme(cfg, data, train_cfg=SMALL_NET, workers=2)
        for a, b in zip(one.features, two.features):
            np.testing.assert_array_equal(a.values, b.values)


class TestEvaluation:

    def test_evaluate_features(self, synth, ds):
        rows = evaluate_features([synth.oracle], ds)
        assert rows[0].feature_id == 'momentum_5'
        assert rows[0].test_ic > 0.8
        assert rows[0].good_flag

    def test_single_feature_diversity(self, synth, ds):
        report = feature_set_diversity([synth.oracle], ds, DiversityConfig(),
                                       0)
        assert report.mean == 0.0
        assert len(report.scores) == len(ds.splits['test'])


class TestSchemeConfig:

    @pytest.mark.parametrize('changes', [{'scheme': 'D'}, {'n_features': 0},
                                         {'teacher_source': 'oracle'},
                                         {'random_teacher': 'uniform'}])
    def test_invalid(self, changes):
        with pytest.raises(ConfigError):
            SchemeConfig(**changes).validate()
