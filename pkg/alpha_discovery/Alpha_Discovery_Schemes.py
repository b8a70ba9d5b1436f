#!/usr/bin/env python

"""This module runs the three feature-construction schemes and writes
their reports.

    Scheme A    genetic programming alone
    Scheme B    networks pre-trained onto teacher features (the GP output
                of Scheme A, or the classical library), then trained on
                the correlation loss
    Scheme C    networks pre-trained onto random teachers, then trained

Every scheme reports the train/validation/test IC of each feature, the
diversity of the feature set on the test split and its wall-clock time.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> result = run_scheme(SchemeConfig('A', n_features=20), data)
    >>> write_scheme_outputs(result, data.panel, 'out')
    >>> write_summary('out')

Output
-------
    Inside ``<out>/scheme_<X>/``: scheme_report.csv, failures.csv (id and
    error of every feature that failed), diversity_report.csv,
    features/<feature_id>.csv, gp_features.csv (Scheme A) and
    contrib_trace.csv (Schemes B and C). ``<out>/summary.txt`` compares
    every scheme present.

Dependencies
------------
    This module depends on numpy and pandas.
"""

from collections import namedtuple
from dataclasses import dataclass, field, replace
import glob
import logging
import os
import time

import numpy as np
import pandas as pd

from alpha_discovery.Alpha_Discovery_DSL import CLASSICAL_FEATURES, \
    classical_feature, feature_from_expr, parse_rpn
from alpha_discovery.Alpha_Discovery_Diversity import DiversityConfig, \
    DiversityReport, diversity_score, write_diversity_report
from alpha_discovery.Alpha_Discovery_Errors import AlphaDiscoveryError, \
    ConfigError, DataError
from alpha_discovery.Alpha_Discovery_Evaluation import GOOD_IC, split_ic
from alpha_discovery.Alpha_Discovery_GP import GpConfig, read_gp_features, \
    run_gp, write_gp_features
from alpha_discovery.Alpha_Discovery_Market_Data import write_feature
from alpha_discovery.Alpha_Discovery_Network import KernelParams, \
    MlpNetwork, TrainConfig, network_feature, pretrain, random_teacher, \
    train, write_contrib_trace
from alpha_discovery.Alpha_Discovery_Parallel import map_tasks, shared

logger = logging.getLogger(__name__)

SCHEMES = ('A', 'B', 'C')
TEACHER_SOURCES = ('gp', 'classical')
RANDOM_TEACHERS = ('normal', 'network')
REPORT_COLUMNS = ['feature_id', 'train_ic', 'val_ic', 'test_ic', 'good_flag']
TIMING_FILE = 'timing.txt'
FAILURES_FILE = 'failures.csv'
FAILURE_COLUMNS = ['feature_id', 'error']

# component ids of the derived seed streams
_STREAMS = {'A': 1, 'B': 2, 'C': 3, 'diversity': 4}


def derived_seed(root, component, index=0):
    """A 32-bit seed for one component stream of a root seed."""
    sequence = np.random.SeedSequence([root, _STREAMS[component], index])
    return int(sequence.generate_state(1)[0])


@dataclass(frozen=True)
class SchemeConfig:
    """Settings of one scheme run.

    Attributes
    ----------
    scheme: string
        'A', 'B' or 'C'.
    n_features: int
        Features to construct.
    teacher_source: string
        Scheme B teachers: 'gp' (Scheme A output) or 'classical'.
    random_teacher: string
        Scheme C teachers: 'normal' or 'network'.
    seed: int
        Root seed.
    """

    scheme: str = 'A'
    n_features: int = 20
    teacher_source: str = 'gp'
    random_teacher: str = 'normal'
    seed: int = 0

    def validate(self):
        if self.scheme not in SCHEMES:
            raise ConfigError('scheme.scheme', 'must be one of A, B, C')
        if self.n_features < 1:
            raise ConfigError('scheme.n_features', 'must be >= 1')
        if self.teacher_source not in TEACHER_SOURCES:
            raise ConfigError('scheme.teacher_source', 'must be gp or '
                              'classical')
        if self.random_teacher not in RANDOM_TEACHERS:
            raise ConfigError('scheme.random_teacher', 'must be normal or '
                              'network')


ExperimentData = namedtuple('ExperimentData', ['panel', 'ds'])
ExperimentData.__doc__ = """A panel with its window dataset; the
forward returns are ``ds.returns``."""

FeatureRow = namedtuple('FeatureRow', REPORT_COLUMNS)


@dataclass
class EvalReport:
    """Per-feature ICs and set-level scores of one scheme.

    Attributes
    ----------
    scheme: string
        Scheme id.
    rows: list of FeatureRow
        One row per constructed feature.
    diversity: DiversityReport
        Diversity of the feature set on the test split.
    seconds: float
        Wall-clock time of the construction.
    failed: list of (string, string)
        Feature id and error message of every feature whose construction
        failed.
    """

    scheme: str
    rows: list
    diversity: DiversityReport
    seconds: float = 0.0
    failed: list = field(default_factory=list)

    @property
    def failures(self):
        return len(self.failed)

    @property
    def test_ic_mean(self):
        return float(np.mean([r.test_ic for r in self.rows])) \
            if self.rows else 0.0

    @property
    def test_ic_std(self):
        return float(np.std([r.test_ic for r in self.rows])) \
            if self.rows else 0.0

    @property
    def good_count(self):
        return sum(r.good_flag for r in self.rows)


@dataclass
class SchemeResult:
    """Everything a scheme run produced.

    Attributes
    ----------
    report: EvalReport
        ICs, diversity and timing.
    features: list of FeaturePanel
        The constructed features, in report order.
    gp_features: list of Individual
        Scheme A's ranked expressions.
    traces: dict of string to list of EpochRecord
        Training histories of Scheme B and C networks.
    """

    report: EvalReport
    features: list
    gp_features: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)


def evaluate_features(features, ds):
    """Train/validation/test IC rows of a feature set."""
    rows = []
    for feature in features:
        ics = split_ic(feature, ds)
        test_ic = ics['test'].mean
        rows.append(FeatureRow(feature.name, ics['train'].mean,
                               ics['val'].mean, test_ic, test_ic >= GOOD_IC))
    return rows


def feature_set_diversity(features, ds, diversity_cfg, seed):
    """Diversity on the test split; a single feature scores 0."""
    days = ds.splits['test']
    if len(features) < 2:
        logger.warning('Diversity needs 2 features, got %d; reporting 0',
                       len(features))
        return DiversityReport(diversity_cfg.metric, 1, tuple(days),
                               np.zeros(len(days)), 0.0, 0.0)
    return diversity_score(features, days, diversity_cfg.metric,
                           k_fraction=diversity_cfg.k_fraction,
                           seed=derived_seed(seed, 'diversity'),
                           raw_cross_entropy=diversity_cfg.raw_cross_entropy)


def _feature_id(scheme, index):
    return '{}{:03d}'.format(scheme, index + 1)


def _run_a(cfg, data, gp_cfg, workers):
    gp_cfg = replace(gp_cfg, seed=derived_seed(cfg.seed, 'A'))
    result = run_gp(gp_cfg, data.ds, data.panel, data.ds.returns,
                    cfg.n_features, workers)
    features = [feature_from_expr(ind.expr, data.panel, data.ds.window_len,
                                  _feature_id('A', i))
                for i, ind in enumerate(result.features)]
    return features, result.features, {}, []


def _teacher(spec, rng):
    kind, value = spec
    ds, panel = shared('ds'), shared('panel')
    if kind == 'expr':
        return feature_from_expr(parse_rpn(value), panel, ds.window_len,
                                 value)
    if kind == 'classical':
        return classical_feature(value, panel, ds.window_len)
    return random_teacher(ds, rng, value, shared('train_cfg').hidden_sizes)


def _train_network(task):
    """Worker entry point: pre-trains and trains one network.

    Returns (feature_id, FeaturePanel or None, history, error message).
    """
    feature_id, spec, seed = task
    ds = shared('ds')
    train_cfg, kernel = shared('train_cfg'), shared('kernel')
    rng = np.random.default_rng(seed)
    try:
        teacher = _teacher(spec, rng)
        sizes = [ds.input_dim] + list(train_cfg.hidden_sizes) + [1]
        net = MlpNetwork.initialize(sizes, rng)
        net = pretrain(net, teacher, ds, train_cfg, rng,
                       random_teacher=spec[0] == 'random')
        best, history = train(net, ds, train_cfg, kernel, rng)
    except AlphaDiscoveryError as err:
        return feature_id, None, [], str(err)
    return feature_id, network_feature(best, ds, feature_id), history, None


def teacher_specs(cfg, teachers=None):
    """The teacher of every network of Scheme B or C.

    Scheme B cycles through ``teachers`` (RPN strings of GP features,
    best validation IC first) or the classical library; Scheme C uses a
    random teacher per network.
    """
    if cfg.scheme == 'C':
        return [('random', cfg.random_teacher)] * cfg.n_features
    if cfg.teacher_source == 'classical':
        pool = [('classical', name) for name in CLASSICAL_FEATURES]
    else:
        if not teachers:
            raise DataError('scheme B with GP teachers needs Scheme A output')
        pool = [('expr', rpn) for rpn in teachers]
    return [pool[i % len(pool)] for i in range(cfg.n_features)]


def _run_networks(cfg, data, train_cfg, kernel, teachers, workers):
    specs = teacher_specs(cfg, teachers)
    tasks = [(_feature_id(cfg.scheme, i), spec,
              derived_seed(cfg.seed, cfg.scheme, i))
             for i, spec in enumerate(specs)]
    context = {'ds': data.ds, 'panel': data.panel, 'train_cfg': train_cfg,
               'kernel': kernel}
    features, traces, failed = [], {}, []
    for feature_id, feature, history, error in map_tasks(
            _train_network, tasks, workers, context):
        if feature is None:
            failed.append((feature_id, error))
            logger.warning('Feature %s failed: %s', feature_id, error)
            continue
        features.append(feature)
        traces[feature_id] = history
    return features, [], traces, failed


def run_scheme(cfg, data, gp_cfg=GpConfig(), train_cfg=TrainConfig(),
               kernel=KernelParams(), diversity_cfg=DiversityConfig(),
               teachers=None, workers=1):
    """Constructs and evaluates one scheme's feature set.

    Parameters
    ----------
    cfg: SchemeConfig
        Scheme id, feature count, teacher choices and root seed.
    data: ExperimentData
        Panel and window dataset.
    gp_cfg: GpConfig
        Scheme A settings; its seed is derived from ``cfg.seed``.
    train_cfg: TrainConfig
        Scheme B and C network settings.
    kernel: KernelParams
        Surrogate-loss kernel.
    diversity_cfg: DiversityConfig
        Diversity metric and cluster fraction.
    teachers: list of strings
        RPN strings of Scheme B teachers when the source is 'gp'.
    workers: int
        Processes; never changes the result.

    Returns
    -------
    result: SchemeResult

    Raises
    ------
    DataError
        If every feature of the scheme failed.
    """
    cfg.validate()
    logger.info('Running scheme %s with %d features', cfg.scheme,
                cfg.n_features)
    start = time.perf_counter()
    if cfg.scheme == 'A':
        features, gp_features, traces, failed = _run_a(cfg, data, gp_cfg,
                                                       workers)
    else:
        features, gp_features, traces, failed = _run_networks(
            cfg, data, train_cfg, kernel, teachers, workers)
    seconds = time.perf_counter() - start
    if not features:
        raise DataError('all {} features of scheme {} failed'.format(
            cfg.n_features, cfg.scheme))
    if failed:
        logger.warning('Scheme %s: %d of %d features failed', cfg.scheme,
                       len(failed), cfg.n_features)

    rows = evaluate_features(features, data.ds)
    diversity = feature_set_diversity(features, data.ds, diversity_cfg,
                                      cfg.seed)
    report = EvalReport(cfg.scheme, rows, diversity, seconds, failed)
    logger.info('Scheme %s: test IC %.4f +/- %.4f, diversity %.4f +/- %.4f, '
                '%.1f s', cfg.scheme, report.test_ic_mean, report.test_ic_std,
                diversity.mean, diversity.std, seconds)
    return SchemeResult(report, features, gp_features, traces)


def scheme_dir(out_dir, scheme):
    return os.path.join(out_dir, 'scheme_{}'.format(scheme))


def load_gp_teachers(out_dir):
    """RPN strings of Scheme A's features, best validation IC first.

    Raises
    ------
    DataError
        If ``out_dir`` holds no Scheme A output.
    """
    path = os.path.join(scheme_dir(out_dir, 'A'), 'gp_features.csv')
    if not os.path.exists(path):
        raise DataError('no Scheme A output at {}; run `alpha-discovery run '
                        'A` with the same --out first, or set '
                        'scheme.teacher_source = classical'.format(path))
    individuals = read_gp_features(path)
    individuals = sorted(individuals, key=lambda ind: -ind.val_fitness)
    return [ind.rpn for ind in individuals]


def rows_frame(rows, scheme=None):
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    frame['good_flag'] = frame['good_flag'].astype(int)
    if scheme is not None:
        frame.insert(0, 'scheme', scheme)
    return frame


def write_scheme_outputs(result, panel, out_dir, record_time=False):
    """Writes a scheme's reports and feature files.

    Returns
    -------
    directory: string
        The scheme directory.
    """
    report = result.report
    directory = scheme_dir(out_dir, report.scheme)
    feature_dir = os.path.join(directory, 'features')
    os.makedirs(feature_dir, exist_ok=True)
    for stale in glob.glob(os.path.join(feature_dir, '*.csv')):
        os.remove(stale)

    rows_frame(report.rows, report.scheme).to_csv(
        os.path.join(directory, 'scheme_report.csv'), index=False,
        lineterminator='\n')
    pd.DataFrame(report.failed, columns=FAILURE_COLUMNS).to_csv(
        os.path.join(directory, FAILURES_FILE), index=False,
        lineterminator='\n')
    write_diversity_report(report.diversity, panel,
                           os.path.join(directory, 'diversity_report.csv'))
    for feature in result.features:
        write_feature(feature, panel,
                      os.path.join(feature_dir, feature.name + '.csv'))
    if result.gp_features:
        write_gp_features(result.gp_features,
                          os.path.join(directory, 'gp_features.csv'))
    if result.traces:
        write_contrib_trace(result.traces,
                            os.path.join(directory, 'contrib_trace.csv'))

    timing = os.path.join(directory, TIMING_FILE)
    if record_time:
        with open(timing, 'w') as f:
            f.write('{:.3f}\n'.format(report.seconds))
    elif os.path.exists(timing):
        os.remove(timing)
    logger.info('Wrote scheme %s outputs to %s', report.scheme, directory)
    return directory


def _summary_row(directory, scheme):
    rows = pd.read_csv(os.path.join(directory, 'scheme_report.csv'))
    diversity = pd.read_csv(os.path.join(directory, 'diversity_report.csv'),
                            dtype={'day': str})
    aggregate = diversity.set_index('day')['score']
    test_ic = rows['test_ic'].to_numpy(dtype=float)
    timing = os.path.join(directory, TIMING_FILE)
    if os.path.exists(timing):
        with open(timing) as f:
            seconds = '{:.1f}'.format(float(f.read().strip()))
    else:
        seconds = '-'
    failures = os.path.join(directory, FAILURES_FILE)
    failed = len(pd.read_csv(failures)) if os.path.exists(failures) else 0
    return [scheme, str(len(rows)), str(failed),
            '{:.4f} +/- {:.4f}'.format(test_ic.mean(), test_ic.std()),
            '{:.4f} +/- {:.4f}'.format(aggregate['mean'], aggregate['std']),
            str(int(rows['good_flag'].sum())), seconds]


def write_summary(out_dir):
    """Rebuilds ``<out>/summary.txt`` from every scheme directory present.

    Returns
    -------
    path: string
        The summary file, or None if no scheme has run.
    """
    header = ['Scheme', 'Features', 'Failed', 'Test IC', 'Test Diversity',
              'Good (IC >= {})'.format(GOOD_IC), 'Time (s)']
    table = [header]
    for scheme in SCHEMES:
        directory = scheme_dir(out_dir, scheme)
        if os.path.exists(os.path.join(directory, 'scheme_report.csv')):
            table.append(_summary_row(directory, scheme))
    if len(table) == 1:
        return None

    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = ['  '.join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in table]
    path = os.path.join(out_dir, 'summary.txt')
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')
    logger.info('Wrote summary of %d schemes to %s', len(table) - 1, path)
    return path
