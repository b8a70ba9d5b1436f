"""Tests for the command-line entry point."""

import os

import pandas as pd
import pytest

from alpha_discovery.Alpha_Discovery_CLI import build_parser, main


def _run(small_ini, out, *argv):
    command, rest = argv[0], list(argv[1:])
    return main([command] + rest + ['--config', small_ini, '--out', out])


class TestParser:

    def test_commands(self):
        args = build_parser().parse_args(['run', 'B', '--seed', '4',
                                          '--workers', '2'])
        assert (args.command, args.scheme, args.seed, args.workers) == \
            ('run', 'B', 4, 2)

    def test_unknown_scheme(self):
        with pytest.raises(SystemExit):
            main(['run', 'D'])

    def test_bad_worker_count(self):
        with pytest.raises(SystemExit):
            main(['synth', '--workers', '0'])


class TestCommands:

    def test_synth(self, tmp_path, small_ini, capsys):
        out = str(tmp_path)
        assert _run(small_ini, out, 'synth') == 0
        for name in ('panel.csv', 'oracle_feature.csv', 'config.ini'):
            assert os.path.exists(os.path.join(out, name))
        panel = pd.read_csv(os.path.join(out, 'panel.csv'))
        assert list(panel.columns) == ['date', 'asset_id', 'open', 'high',
                                       'low', 'close', 'volume']
        assert len(panel) == 30 * 67
        assert 'Oracle IC of momentum_5' in capsys.readouterr().out

    def test_synth_is_reproducible(self, tmp_path, small_ini):
        first, second = str(tmp_path / 'one'), str(tmp_path / 'two')
        _run(small_ini, first, 'synth', '--seed', '3')
        _run(small_ini, second, 'synth', '--seed', '3')
        with open(os.path.join(first, 'panel.csv')) as f, \
                open(os.path.join(second, 'panel.csv')) as g:
            assert f.read() == g.read()

    def test_run_a_then_evaluate(self, tmp_path, small_ini):
        out = str(tmp_path)
        assert _run(small_ini, out, 'run', 'A') == 0
        assert os.path.exists(os.path.join(out, 'summary.txt'))
        features = os.path.join(out, 'scheme_A', 'features')
        paths = sorted(os.path.join(features, name)
                       for name in os.listdir(features))
        assert len(paths) == 4

        assert _run(small_ini, out, 'eval', *paths) == 0
        report = pd.read_csv(os.path.join(out, 'eval_report.csv'))
        assert list(report['feature_id']) == ['A001', 'A002', 'A003', 'A004']

        assert _run(small_ini, out, 'diversity', *paths) == 0
        assert os.path.exists(os.path.join(out, 'diversity_report.csv'))

        assert _run(small_ini, out, 'backtest', *paths[:2]) == 0
        backtest = pd.read_csv(os.path.join(out, 'backtest.csv'))
        assert len(backtest) == 5

    def test_run_b_without_a(self, tmp_path, small_ini, capsys):
        assert _run(small_ini, str(tmp_path), 'run', 'B') == 1
        assert 'run A' in capsys.readouterr().err

    def test_missing_feature_file(self, tmp_path, small_ini):
        assert _run(small_ini, str(tmp_path), 'eval', 'nope.csv') == 1

    def test_configuration_error(self, tmp_path, capsys):
        path = tmp_path / 'bad.ini'
        path.write_text('[gp]\npopulation_size = many\n')
        assert main(['synth', '--config', str(path),
                     '--out', str(tmp_path)]) == 2
        assert 'gp.population_size' in capsys.readouterr().err
