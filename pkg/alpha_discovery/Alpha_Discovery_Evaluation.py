#!/usr/bin/env python

"""This module scores features: exact Spearman rank correlation, the
per-day information coefficient (IC) of a feature against forward
returns, and a simplified long-only top-decile backtest.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> summary = feature_ic(feature, ds.returns, ds.splits['test'])
    >>> summary.mean, summary.std

Output
-------
    ``write_backtest`` writes ``backtest.csv`` with the columns
    period_start, portfolio_return, benchmark_return, cumulative.

Dependencies
------------
    This module depends on numpy, pandas and scipy.
"""

from collections import namedtuple
from dataclasses import dataclass
import logging
import math

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from alpha_discovery.Alpha_Discovery_Errors import DataError
from alpha_discovery.Alpha_Discovery_Market_Data import SPLIT_NAMES

logger = logging.getLogger(__name__)

GOOD_IC = 0.05
MIN_REBALANCE_ASSETS = 10

ICSummary = namedtuple('ICSummary', ['mean', 'std', 'days', 'series',
                                     'degenerate'])
ICSummary.__doc__ = """Per-day IC of one feature over a set of days.

mean, std: floats over the scored days (population std); 0 if none.
days: tuple of scored day indices.
series: 1-D numpy array, the IC of each scored day.
degenerate: 1-D numpy array of bools, days where either side was
    constant (scored 0).
"""


def _spearman(x, y):
    """Spearman correlation with a degeneracy flag."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError('spearman needs two equal-length vectors, got {} '
                        'and {}'.format(x.shape, y.shape))
    if x.size < 2:
        raise DataError('spearman needs at least 2 observations')
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sx = np.dot(rx, rx)
    sy = np.dot(ry, ry)
    if sx == 0 or sy == 0:
        return 0.0, True
    rho = np.dot(rx, ry) / math.sqrt(sx * sy)
    return float(min(1.0, max(-1.0, rho))), False


def spearman_exact(x, y):
    """Pearson correlation of average-tied ranks.

    Parameters
    ----------
    x, y: 1-D array-likes
        Equal lengths, at least 2.

    Returns
    -------
    rho: float
        In [-1, 1]; 0 when either side is constant.
    """
    return _spearman(x, y)[0]


def is_degenerate(x, y):
    """True when spearman_exact(x, y) is 0 because a side is constant."""
    return _spearman(x, y)[1]


def rank01(x):
    """Average-tied ranks mapped onto [0, 1]; 0.5 for a single value."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return np.full(x.shape, 0.5)
    return (rankdata(x) - 1.0) / (x.size - 1.0)


def feature_ic(feature, returns, days, min_cross_section=2):
    """Exact Spearman IC of a feature against forward returns.

    Parameters
    ----------
    feature: FeaturePanel
        The feature.
    returns: ForwardReturns
        Forward returns on the same grid.
    days: iterable of ints
        Day indices to score.
    min_cross_section: int
        Days with fewer valid (feature, return) pairs are skipped.

    Returns
    -------
    summary: ICSummary
        Mean and std over scored days plus the per-day series.
    """
    scored, series, degenerate = [], [], []
    for day in days:
        mask = feature.valid[:, day] & returns.valid[:, day]
        if mask.sum() < max(2, min_cross_section):
            continue
        rho, flat = _spearman(feature.values[mask, day],
                              returns.values[mask, day])
        scored.append(day)
        series.append(rho)
        degenerate.append(flat)
    series = np.asarray(series, dtype=float)
    degenerate = np.asarray(degenerate, dtype=bool)
    if series.size == 0:
        return ICSummary(0.0, 0.0, (), series, degenerate)
    return ICSummary(float(series.mean()), float(series.std()),
                     tuple(scored), series, degenerate)


def split_ic(feature, ds):
    """Mean daily IC of a feature on each split of a WindowDataset.

    Returns
    -------
    ics: dict of string to ICSummary
        Keyed 'train', 'val' and 'test'.
    """
    return {name: feature_ic(feature, ds.returns, ds.splits[name],
                             ds.min_cross_section)
            for name in SPLIT_NAMES}


@dataclass(frozen=True, eq=False)
class BacktestResult:
    """Outcome of a long-only top-decile backtest.

    Attributes
    ----------
    holding: int
        Holding period in trading days.
    period_starts: tuple of ints
        Rebalance day indices.
    portfolio_returns: 1-D numpy array
        Return of each holding period.
    benchmark_returns: 1-D numpy array
        Equal-weight universe return of each period.
    cumulative: 1-D numpy array
        Compounded portfolio return after each period.
    benchmark_cumulative: 1-D numpy array
        Compounded benchmark return after each period.
    positions: tuple of 1-D numpy arrays
        Asset indices held in each period.
    """

    holding: int
    period_starts: tuple
    portfolio_returns: np.ndarray
    benchmark_returns: np.ndarray
    cumulative: np.ndarray
    benchmark_cumulative: np.ndarray
    positions: tuple

    @property
    def total_return(self):
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0

    @property
    def benchmark_total_return(self):
        if not self.benchmark_cumulative.size:
            return 0.0
        return float(self.benchmark_cumulative[-1])


def period_returns(panel, assets, day, holding):
    """Close-to-close return of each asset from ``day`` to ``day +
    holding``.

    An asset that stops trading before the period ends is marked at its
    last tradable close inside the period; one that trades on no later
    day of the period returns 0.
    """
    assets = np.asarray(assets, dtype=int)
    end = min(day + holding, panel.n_days - 1)
    close = panel.field('close')[assets, day:end + 1]
    tradable = panel.tradable[assets, day:end + 1].copy()
    tradable[:, 0] = True
    last = tradable.shape[1] - 1 - np.argmax(tradable[:, ::-1], axis=1)
    exit_close = close[np.arange(assets.size), last]
    return exit_close / close[:, 0] - 1.0


def composite_score(features, mask, day):
    """Equal-weight mean of each feature's rank01 over the masked
    cross-section of one day."""
    return np.mean([rank01(f.values[mask, day]) for f in features], axis=0)


def backtest_top_decile(features, panel, returns, days, holding=5):
    """Longs the top decile of an equal-weight rank composite every
    ``holding`` days.

    Positions at a rebalance day use only the feature values and the
    tradability of that day. Held assets that stop trading during a
    period are marked at their last tradable close.
    Ties are broken by asset order.

    Parameters
    ----------
    features: list of FeaturePanel
        At least one feature.
    panel: OhlcvPanel
        Provides tradability.
    returns: ForwardReturns
        Forward returns of the run; their horizon must equal ``holding``.
    days: range or list of ints
        Consecutive day indices of the evaluation split.
    holding: int
        Days between rebalances.

    Returns
    -------
    result: BacktestResult

    Raises
    ------
    DataError
        If no feature is given, the horizon differs from the holding
        period, or a rebalance day has fewer than 10 tradable assets.
    """
    features = list(features)
    if not features:
        raise DataError('backtest needs at least one feature')
    if returns.horizon != holding:
        raise DataError('forward-return horizon {} differs from holding '
                        'period {}'.format(returns.horizon, holding))

    days = list(days)
    starts = days[::holding]
    portfolio, benchmark, positions = [], [], []
    for day in starts:
        mask = panel.tradable[:, day].copy()
        for feature in features:
            mask &= feature.valid[:, day]
        universe = np.flatnonzero(mask)
        if universe.size < MIN_REBALANCE_ASSETS:
            raise DataError('rebalance day {} has {} tradable assets, need {}'
                            .format(panel.days[day], universe.size,
                                    MIN_REBALANCE_ASSETS))
        score = composite_score(features, mask, day)
        n_top = int(math.ceil(universe.size / 10.0))
        # descending score, then ascending asset index
        order = np.lexsort((universe, -score))
        held = universe[order[:n_top]]
        period = period_returns(panel, universe, day, holding)
        portfolio.append(float(period[order[:n_top]].mean()))
        benchmark.append(float(period.mean()))
        positions.append(held)

    portfolio = np.asarray(portfolio)
    benchmark = np.asarray(benchmark)
    compounded = np.cumprod(1.0 + benchmark) - 1.0
    return BacktestResult(holding=holding,
                          period_starts=tuple(starts),
                          portfolio_returns=portfolio,
                          benchmark_returns=benchmark,
                          cumulative=np.cumprod(1.0 + portfolio) - 1.0,
                          benchmark_cumulative=compounded,
                          positions=tuple(positions))


def write_backtest(result, panel, path):
    """Writes one row per holding period to ``path``."""
    frame = pd.DataFrame({
        'period_start': [panel.days[d] for d in result.period_starts],
        'portfolio_return': result.portfolio_returns,
        'benchmark_return': result.benchmark_returns,
        'cumulative': result.cumulative})
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info('Wrote %d backtest periods to %s (cumulative %.4f vs %.4f)',
                len(frame), path, result.total_return,
                result.benchmark_total_return)
