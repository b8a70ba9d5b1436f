#!/usr/bin/env python

"""Command-line entry point of alpha_discovery.

Commands
--------
    synth               write a synthetic planted-signal panel and its
                        oracle feature
    run {A,B,C}         construct and evaluate one scheme's features
    eval FEATURE...     train/validation/test IC of feature CSVs
    diversity FEATURE...
                        test-split diversity of feature CSVs
    backtest FEATURE... long top-decile backtest of feature CSVs

Every command writes the resolved configuration to ``<out>/config.ini``.
Exit codes are 0 on success, 1 on a runtime failure and 2 on a
configuration or usage error.

Authors
-------
    alpha_discovery contributors

Use
---
    This program is intended to be executed via the command line as
    such:

    >>> alpha-discovery synth --seed 7 --out runs/s7
    >>> alpha-discovery run A --seed 7 --out runs/s7 --workers 4
    >>> alpha-discovery run B --seed 7 --out runs/s7 --workers 4

Output
-------
    panel.csv, oracle_feature.csv, scheme_<X>/..., summary.txt,
    eval_report.csv, diversity_report.csv and backtest.csv under the
    output directory.

Dependencies
------------
    This module depends on the other alpha_discovery modules.
"""

import argparse
from dataclasses import replace
import logging
import os
import sys

from alpha_discovery.Alpha_Discovery_Config import read_config, write_config
from alpha_discovery.Alpha_Discovery_Diversity import diversity_score, \
    write_diversity_report
from alpha_discovery.Alpha_Discovery_Errors import AlphaDiscoveryError, \
    ConfigError, DataError
from alpha_discovery.Alpha_Discovery_Evaluation import backtest_top_decile, \
    write_backtest
from alpha_discovery.Alpha_Discovery_Market_Data import build_windows, \
    load_feature, load_panel, write_feature, write_panel
from alpha_discovery.Alpha_Discovery_Schemes import ExperimentData, \
    evaluate_features, load_gp_teachers, rows_frame, run_scheme, \
    write_scheme_outputs, write_summary
from alpha_discovery.Alpha_Discovery_Synthetic import generate_synthetic_panel

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def synthesize(cfg):
    """Generates the configured synthetic panel."""
    data = cfg.data
    return generate_synthetic_panel(cfg.synth, data.window_len, data.splits,
                                    data.horizon, data.min_cross_section)


def load_experiment(cfg):
    """Loads or synthesizes the panel and builds its window dataset."""
    data = cfg.data
    if data.source == 'csv':
        panel = load_panel(data.path)
    else:
        panel = synthesize(cfg).panel
    ds = build_windows(panel, data.window_len, data.splits, data.horizon,
                       data.min_cross_section, data.window_scaling)
    return ExperimentData(panel, ds)


def _prepare_out(cfg):
    out = cfg.output.directory
    os.makedirs(out, exist_ok=True)
    write_config(cfg, os.path.join(out, 'config.ini'))
    return out


def _load_features(paths, panel):
    features = []
    for path in paths:
        if not os.path.exists(path):
            raise DataError('feature file {} does not exist'.format(path))
        name = os.path.splitext(os.path.basename(path))[0]
        features.append(load_feature(path, panel, name))
    return features


def cmd_synth(cfg, args):
    out = _prepare_out(cfg)
    synth = synthesize(cfg)
    write_panel(synth.panel, os.path.join(out, 'panel.csv'))
    write_feature(synth.oracle, synth.panel,
                  os.path.join(out, 'oracle_feature.csv'))
    print('Oracle IC of {}: {:.4f} +/- {:.4f} over {} days'.format(
        cfg.synth.planted_feature, synth.oracle_ic.mean, synth.oracle_ic.std,
        len(synth.oracle_ic.days)))
    print('Panel written to {}'.format(out))


def cmd_run(cfg, args):
    out = _prepare_out(cfg)
    scheme = replace(cfg.scheme, scheme=args.scheme)
    teachers = None
    if scheme.scheme == 'B' and scheme.teacher_source == 'gp':
        teachers = load_gp_teachers(out)
    data = load_experiment(cfg)
    result = run_scheme(scheme, data, cfg.gp, cfg.adnn, cfg.kernel,
                        cfg.diversity, teachers, args.workers)
    directory = write_scheme_outputs(result, data.panel, out,
                                     cfg.output.record_time)
    write_summary(out)
    report = result.report
    print('Scheme {}: test IC {:.4f} +/- {:.4f}, diversity {:.4f} +/- {:.4f}'
          .format(report.scheme, report.test_ic_mean, report.test_ic_std,
                  report.diversity.mean, report.diversity.std))
    print('Reports written to {}'.format(directory))
    if report.failures:
        logger.warning('%d features failed; partial results were written',
                       report.failures)
        return 1
    return 0


def cmd_eval(cfg, args):
    out = _prepare_out(cfg)
    data = load_experiment(cfg)
    features = _load_features(args.features, data.panel)
    frame = rows_frame(evaluate_features(features, data.ds))
    frame.to_csv(os.path.join(out, 'eval_report.csv'), index=False,
                 lineterminator='\n')
    print(frame.to_string(index=False))


def cmd_diversity(cfg, args):
    out = _prepare_out(cfg)
    data = load_experiment(cfg)
    features = _load_features(args.features, data.panel)
    report = diversity_score(features, data.ds.splits['test'],
                             cfg.diversity.metric,
                             k_fraction=cfg.diversity.k_fraction,
                             seed=cfg.seed,
                             raw_cross_entropy=cfg.diversity.raw_cross_entropy)
    write_diversity_report(report, data.panel,
                           os.path.join(out, 'diversity_report.csv'))
    print('Diversity ({}, k={}): {:.4f} +/- {:.4f}'.format(
        report.metric, report.k, report.mean, report.std))


def cmd_backtest(cfg, args):
    out = _prepare_out(cfg)
    data = load_experiment(cfg)
    features = _load_features(args.features, data.panel)
    result = backtest_top_decile(features, data.panel, data.ds.returns,
                                 data.ds.splits['test'], cfg.data.horizon)
    write_backtest(result, data.panel, os.path.join(out, 'backtest.csv'))
    print('Cumulative return {:.4f} vs benchmark {:.4f} over {} periods'
          .format(result.total_return, result.benchmark_total_return,
                  len(result.period_starts)))


COMMANDS = {'synth': cmd_synth, 'run': cmd_run, 'eval': cmd_eval,
            'diversity': cmd_diversity, 'backtest': cmd_backtest}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='INI configuration file')
    common.add_argument('--seed', type=int, help='root seed override')
    common.add_argument('--workers', type=int, default=1,
                        help='worker processes (default 1)')
    common.add_argument('--out', help='output directory override')
    common.add_argument('-v', '--verbose', action='store_true',
                        help='debug logging')

    parser = argparse.ArgumentParser(
        prog='alpha-discovery',
        description='Construct and compare cross-sectional alpha features.')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('synth', parents=[common],
                        help='write a synthetic planted-signal panel')
    run = commands.add_parser('run', parents=[common],
                              help='run a feature-construction scheme')
    run.add_argument('scheme', choices=['A', 'B', 'C'])
    for name, text in (('eval', 'IC of feature files'),
                       ('diversity', 'diversity of feature files'),
                       ('backtest', 'top-decile backtest of feature files')):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument('features', nargs='+', help='feature CSV files')
    return parser


def main(argv=None):
    """Runs one command and returns its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(format=LOG_FORMAT,
                        level=logging.DEBUG if args.verbose else logging.INFO)
    if args.workers < 1:
        parser.error('--workers must be >= 1')
    try:
        cfg = read_config(args.config, args.seed, args.out)
        return COMMANDS[args.command](cfg, args) or 0
    except ConfigError as err:
        print('alpha-discovery: configuration error: {}'.format(err),
              file=sys.stderr)
        return 2
    except (AlphaDiscoveryError, OSError) as err:
        print('alpha-discovery: error: {}'.format(err), file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
