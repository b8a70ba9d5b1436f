#!/usr/bin/env python

"""This module synthesizes OHLCV panels with a planted signal, standing
in for proprietary daily equity data.

Every asset's close is a geometric random walk with one step per day:

    log close(d) = log close(d - 1) + base_vol * m_d
                   + (signal_beta / h) * z_{d-1}
                   + (noise_sigma / sqrt(h)) * e_d

where m_d is a market shock shared by all assets, z_{d-1} is the
cross-sectional z-score of the planted classical feature on the
previous day (0 during its warm-up) and e_d is idiosyncratic noise.
Over a horizon of h days the idiosyncratic noise has standard deviation
noise_sigma and the planted drift adds up to about signal_beta * z_t,
so the planted feature ranks forward returns with an IC set by the two
(the "oracle IC", computed exactly from the realized returns). The
market shock moves every asset alike and leaves ranks unchanged. Open,
high, low and volume are drawn around the close and only depend on
already generated days, so the planted feature on day t only sees data
up to t.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> synth = generate_synthetic_panel(SynthConfig(seed=7))
    >>> synth.oracle_ic.mean

Dependencies
------------
    This module depends on numpy and pandas.
"""

from collections import namedtuple
from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd

from alpha_discovery.Alpha_Discovery_DSL import CLASSICAL_FEATURES, \
    classical_expr, classical_feature, evaluate_fields, lookback
from alpha_discovery.Alpha_Discovery_Errors import ConfigError
from alpha_discovery.Alpha_Discovery_Evaluation import feature_ic
from alpha_discovery.Alpha_Discovery_Market_Data import FIELDS, OhlcvPanel, \
    forward_return

logger = logging.getLogger(__name__)

START_DATE = '2018-01-02'


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of a synthetic planted-signal panel.

    Attributes
    ----------
    n_assets: int
        Number of assets.
    n_days: int
        Number of trading days.
    seed: int
        Root seed; identical seeds give bit-identical panels.
    planted_feature: string
        Name of the classical feature that drives forward returns.
    signal_beta: float
        Log-return loading on the planted feature's z-score (>= 0).
    noise_sigma: float
        Standard deviation of the idiosyncratic horizon log-return (> 0).
    base_vol: float
        Daily volatility of the market shock and scale of the bar
        spreads.
    """

    n_assets: int = 100
    n_days: int = 345
    seed: int = 0
    planted_feature: str = 'momentum_5'
    signal_beta: float = 0.02
    noise_sigma: float = 0.035
    base_vol: float = 0.02

    def validate(self, window_len=30, splits=(250, 30, 30), horizon=5):
        needed = window_len + sum(splits) + horizon
        if self.n_days < needed:
            raise ConfigError('synth.n_days', 'must be >= {} (window {} + '
                              'splits {} + horizon {}), got {}'.format(
                                  needed, window_len, sum(splits), horizon,
                                  self.n_days))
        if self.n_assets < 2:
            raise ConfigError('synth.n_assets', 'must be >= 2')
        if self.planted_feature not in CLASSICAL_FEATURES:
            raise ConfigError('synth.planted_feature', 'unknown feature {!r}'
                              .format(self.planted_feature))
        if not self.signal_beta >= 0:
            raise ConfigError('synth.signal_beta', 'must be >= 0')
        if not self.noise_sigma > 0:
            raise ConfigError('synth.noise_sigma', 'must be > 0')
        if not self.base_vol >= 0:
            raise ConfigError('synth.base_vol', 'must be >= 0')


SyntheticPanel = namedtuple('SyntheticPanel', ['panel', 'oracle', 'returns',
                                               'oracle_ic'])
SyntheticPanel.__doc__ = """A generated panel with its planted feature.

panel: OhlcvPanel; oracle: FeaturePanel of the planted feature;
returns: ForwardReturns at the generation horizon;
oracle_ic: ICSummary of the oracle against the realized returns.
"""


class _BarNoise:
    """Pre-drawn noise for the non-close fields of every bar."""

    def __init__(self, rng, n_assets, n_days):
        self.gap = rng.standard_normal((n_assets, n_days))
        self.up = np.abs(rng.standard_normal((n_assets, n_days)))
        self.down = np.abs(rng.standard_normal((n_assets, n_days)))
        self.volume = rng.standard_normal((n_assets, n_days))
        self.volume_level = np.exp(13.0 + 0.5 * rng.standard_normal(n_assets))


def _bars(close, noise, base_vol):
    """Open/high/low/volume for the days covered by ``close``; day d only
    uses closes d - 1 and d."""
    n_days = close.shape[1]
    previous = np.concatenate([close[:, :1], close[:, :-1]], axis=1)
    open_ = previous * np.exp(0.25 * base_vol * noise.gap[:, :n_days])
    high = np.maximum(open_, close) * \
        np.exp(0.5 * base_vol * noise.up[:, :n_days])
    low = np.minimum(open_, close) * \
        np.exp(-0.5 * base_vol * noise.down[:, :n_days])
    volume = np.round(noise.volume_level[:, None] *
                      np.exp(0.3 * noise.volume[:, :n_days]))
    return {'open': open_, 'high': high, 'low': low, 'close': close,
            'volume': volume}


def _zscore(x):
    std = x.std()
    if std == 0 or not np.isfinite(std):
        return np.zeros_like(x)
    return (x - x.mean()) / std


def generate_synthetic_panel(cfg, window_len=30, splits=(250, 30, 30),
                             horizon=5, min_cross_section=20):
    """Generates a planted-signal panel.

    Parameters
    ----------
    cfg: SynthConfig
        Generator settings.
    window_len, splits, horizon:
        The dataset layout the panel must support.
    min_cross_section: int
        Minimum pairs for a day to enter the oracle IC.

    Returns
    -------
    synth: SyntheticPanel
        Panel, oracle feature, forward returns and oracle IC.

    Raises
    ------
    ConfigError
        If ``cfg`` violates its invariants.
    """
    cfg.validate(window_len, splits, horizon)
    rng = np.random.default_rng(cfg.seed)
    n, T, h = cfg.n_assets, cfg.n_days, horizon

    level = np.log(100.0) + 0.1 * rng.standard_normal(n)
    market = cfg.base_vol * rng.standard_normal(T)
    shocks = cfg.noise_sigma / np.sqrt(h) * rng.standard_normal((n, T))
    noise = _BarNoise(rng, n, T)

    planted = classical_expr(cfg.planted_feature)
    warmup = max(lookback(planted), window_len - 1)
    tradable = np.ones((n, T), dtype=bool)
    log_close = np.zeros((n, T))
    log_close[:, 0] = level
    for day in range(1, T):
        drift = np.zeros(n)
        if cfg.signal_beta > 0 and day - 1 >= warmup:
            fields = _bars(np.exp(log_close[:, :day]), noise, cfg.base_vol)
            value = evaluate_fields(planted, fields, tradable[:, :day])
            drift = cfg.signal_beta / h * _zscore(value[:, day - 1])
        log_close[:, day] = log_close[:, day - 1] + market[day] + drift + \
            shocks[:, day]

    fields = _bars(np.exp(log_close), noise, cfg.base_vol)
    values = np.stack([fields[name] for name in FIELDS], axis=-1)
    days = tuple(pd.bdate_range(START_DATE, periods=T).strftime('%Y-%m-%d'))
    assets = tuple('A{:04d}'.format(i) for i in range(n))
    panel = OhlcvPanel(assets, days, values, tradable)

    oracle = classical_feature(cfg.planted_feature, panel, window_len)
    returns = forward_return(panel, horizon)
    oracle_ic = feature_ic(oracle, returns, range(T), min_cross_section)
    logger.info('Synthesized %d x %d panel planting %s: oracle IC %.4f '
                '+/- %.4f over %d days', n, T, cfg.planted_feature,
                oracle_ic.mean, oracle_ic.std, len(oracle_ic.days))
    return SyntheticPanel(panel, oracle, returns, oracle_ic)
