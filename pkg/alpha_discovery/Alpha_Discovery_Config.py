#!/usr/bin/env python

"""This module reads and writes the run configuration: an INI file of
``key = value`` lines grouped in sections, mapped onto a tree of
dataclasses with every field defaulted.

    [run]        seed
    [data]       source, path, window_len, horizon, train_days, val_days,
                 test_days, min_cross_section, window_scaling
    [synth]      n_assets, n_days, planted_feature, signal_beta,
                 noise_sigma, base_vol
    [gp]         population_size, generations, tournament_size,
                 p_crossover, p_subtree_mutation, p_point_mutation,
                 max_depth, elitism, hall_of_fame
    [adnn]       lr, beta1, beta2, batch_days, batches_per_epoch,
                 max_epochs, patience, pretrain_epochs, fidelity,
                 random_pretrain_epochs, hidden_sizes
    [kernel]     p, epsilon_std
    [diversity]  metric, k_fraction, raw_cross_entropy
    [scheme]     n_features, teacher_source, random_teacher
    [output]     directory, record_time

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> cfg = read_config('experiment.ini', seed=11)
    >>> write_config(cfg, 'out/config.ini')

Dependencies
------------
    This module depends only on the standard library and the other
    alpha_discovery modules.
"""

import configparser
from dataclasses import dataclass, field, fields, replace
import logging

from alpha_discovery.Alpha_Discovery_Diversity import DiversityConfig
from alpha_discovery.Alpha_Discovery_Errors import ConfigError
from alpha_discovery.Alpha_Discovery_GP import GpConfig
from alpha_discovery.Alpha_Discovery_Network import KernelParams, TrainConfig
from alpha_discovery.Alpha_Discovery_Schemes import SchemeConfig
from alpha_discovery.Alpha_Discovery_Synthetic import SynthConfig

logger = logging.getLogger(__name__)

DATA_SOURCES = ('synthetic', 'csv')
WINDOW_SCALINGS = ('raw', 'relative')


@dataclass(frozen=True)
class DataConfig:
    """Where the panel comes from and how it is windowed.

    Attributes
    ----------
    source: string
        'synthetic' or 'csv'.
    path: string
        Panel CSV when the source is 'csv'.
    window_len: int
        Trading days per input window.
    horizon: int
        Forward-return horizon in trading days.
    train_days, val_days, test_days: int
        Split lengths.
    min_cross_section: int
        Minimum valid assets for a day to be used.
    window_scaling: string
        'raw' or 'relative'.
    """

    source: str = 'synthetic'
    path: str = ''
    window_len: int = 30
    horizon: int = 5
    train_days: int = 250
    val_days: int = 30
    test_days: int = 30
    min_cross_section: int = 20
    window_scaling: str = 'raw'

    @property
    def splits(self):
        return (self.train_days, self.val_days, self.test_days)

    def validate(self):
        if self.source not in DATA_SOURCES:
            raise ConfigError('data.source', 'must be synthetic or csv')
        if self.source == 'csv' and not self.path:
            raise ConfigError('data.path', 'is required when source = csv')
        for name in ('window_len', 'horizon', 'train_days', 'val_days',
                     'test_days'):
            if getattr(self, name) < 1:
                raise ConfigError('data.' + name, 'must be >= 1')
        if self.min_cross_section < 2:
            raise ConfigError('data.min_cross_section', 'must be >= 2')
        if self.window_scaling not in WINDOW_SCALINGS:
            raise ConfigError('data.window_scaling', 'must be raw or relative')


@dataclass(frozen=True)
class OutputConfig:
    """Output directory and whether wall-clock times are recorded."""

    directory: str = 'out'
    record_time: bool = False


@dataclass(frozen=True)
class RunConfig:
    """The whole configuration of a run; ``seed`` is the root of every
    random stream."""

    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    gp: GpConfig = field(default_factory=GpConfig)
    adnn: TrainConfig = field(default_factory=TrainConfig)
    kernel: KernelParams = field(default_factory=KernelParams)
    diversity: DiversityConfig = field(default_factory=DiversityConfig)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self):
        self.data.validate()
        if self.data.source == 'synthetic':
            self.synth.validate(self.data.window_len, self.data.splits,
                                self.data.horizon)
        self.gp.validate()
        self.adnn.validate()
        self.kernel.validate()
        self.diversity.validate()
        self.scheme.validate()
        if self.scheme.n_features > self.gp.hall_size:
            raise ConfigError('scheme.n_features', 'exceeds the GP hall of '
                              'fame ({})'.format(self.gp.hall_size))


SECTIONS = ('run', 'data', 'synth', 'gp', 'adnn', 'kernel', 'diversity',
            'scheme', 'output')

# fields set from the root seed or the command line, not from the file
_DERIVED = {'synth': ('seed',), 'gp': ('seed',), 'scheme': ('scheme', 'seed')}


def _section_fields(section):
    if section == 'run':
        return [f for f in fields(RunConfig) if f.name == 'seed']
    derived = _DERIVED.get(section, ())
    owner = {f.name: f for f in fields(RunConfig)}[section]
    return [f for f in fields(owner.default_factory)
            if f.name not in derived]


def _coerce(section, spec, raw):
    name = '{}.{}'.format(section, spec.name)
    text = raw.strip()
    try:
        if spec.type is bool:
            state = text.lower()
            if state not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(text)
            return configparser.ConfigParser.BOOLEAN_STATES[state]
        if spec.type is tuple:
            return tuple(int(part) for part in text.split(',') if part.strip())
        if spec.type is int:
            if spec.default is None and text.lower() in ('', 'none'):
                return None
            return int(text)
        if spec.type is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(name, 'cannot read {!r} as {}'.format(
            raw, spec.type.__name__))


def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value is None:
        return 'none'
    if isinstance(value, tuple):
        return ', '.join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _apply_seed(cfg):
    return replace(cfg, synth=replace(cfg.synth, seed=cfg.seed),
                   gp=replace(cfg.gp, seed=cfg.seed),
                   scheme=replace(cfg.scheme, seed=cfg.seed))


def parse_config(parser):
    """Builds a validated RunConfig from a loaded ConfigParser.

    Raises
    ------
    ConfigError
        On an unknown section or key, an unreadable value or a violated
        invariant.
    """
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, 'unknown section; expected one of {}'
                              .format(', '.join(SECTIONS)))
        specs = {f.name: f for f in _section_fields(section)}
        updates = {}
        for key, raw in parser.items(section):
            if key not in specs:
                raise ConfigError('{}.{}'.format(section, key), 'unknown key')
            updates[key] = _coerce(section, specs[key], raw)
        values[section] = updates

    cfg = RunConfig(seed=values.pop('run', {}).get('seed', 0))
    for section, updates in values.items():
        cfg = replace(cfg, **{section: replace(getattr(cfg, section),
                                               **updates)})
    cfg = _apply_seed(cfg)
    cfg.validate()
    return cfg


def read_config(path=None, seed=None, directory=None):
    """Reads an INI file (or the defaults) and applies overrides.

    Parameters
    ----------
    path: string
        INI file; None for the defaults.
    seed: int
        Overrides ``[run] seed``.
    directory: string
        Overrides ``[output] directory``.

    Returns
    -------
    cfg: RunConfig
        Validated configuration with every seed resolved.
    """
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            with open(path) as f:
                parser.read_file(f)
        except configparser.Error as err:
            raise ConfigError(path, str(err).splitlines()[0])
    cfg = parse_config(parser)
    if seed is not None:
        cfg = _apply_seed(replace(cfg, seed=seed))
    if directory is not None:
        cfg = replace(cfg, output=replace(cfg.output, directory=directory))
    cfg.validate()
    return cfg


def config_parser(cfg):
    """The resolved configuration as a ConfigParser, every key present."""
    parser = configparser.ConfigParser(interpolation=None)
    for section in SECTIONS:
        owner = cfg if section == 'run' else getattr(cfg, section)
        parser[section] = {f.name: _format(getattr(owner, f.name))
                           for f in _section_fields(section)}
    return parser


def write_config(cfg, path):
    """Writes the resolved configuration so the run can be repeated."""
    with open(path, 'w') as f:
        config_parser(cfg).write(f)
    logger.info('Wrote resolved configuration to %s', path)
