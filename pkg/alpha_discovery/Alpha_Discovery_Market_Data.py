#!/usr/bin/env python

"""This module holds the panel data structures of alpha_discovery and
everything needed to turn a raw OHLCV panel into training material for
the feature constructors: forward returns, standardized 30-day input
windows, train/validation/test splits and cross-sectional day batches.

A panel is a dense asset x trading-day grid. Days on which an asset did
not trade are kept in the grid and flagged untradable; their prices are
carried forward so that arithmetic stays finite, but they never enter a
cross-section, an input window or a portfolio.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> from alpha_discovery.Alpha_Discovery_Market_Data import load_panel
    >>> panel = load_panel('panel.csv')
    >>> ds = build_windows(panel, 30, (250, 30, 30), horizon=5)

Output
-------
    ``write_panel`` and ``write_feature`` produce the CSV formats
    ``date,asset_id,open,high,low,close,volume`` and
    ``date,asset_id,value``.

Dependencies
------------
    This module depends on numpy and pandas.
"""

from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from alpha_discovery.Alpha_Discovery_Errors import DataError, PanelFormatError

logger = logging.getLogger(__name__)

FIELDS = ('open', 'high', 'low', 'close', 'volume')
PRICE_FIELDS = ('open', 'high', 'low', 'close')
CLOSE = FIELDS.index('close')
VOLUME = FIELDS.index('volume')
PANEL_COLUMNS = ['date', 'asset_id'] + list(FIELDS)
FEATURE_COLUMNS = ['date', 'asset_id', 'value']
SPLIT_NAMES = ('train', 'val', 'test')


def _freeze(array):
    """Returns a read-only view so shared data cannot be mutated."""
    array = np.asarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class OhlcvPanel:
    """A rectangular asset x trading-day grid of OHLCV bars.

    Attributes
    ----------
    assets: tuple of strings
        Asset identifiers, sorted.
    days: tuple of strings
        ISO-8601 trading dates, strictly increasing.
    values: 3-D numpy array of floats
        ``values[asset, day, field]`` with fields ordered as FIELDS.
    tradable: 2-D numpy array of bools
        ``tradable[asset, day]``.
    """

    assets: tuple
    days: tuple
    values: np.ndarray
    tradable: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        tradable = np.asarray(self.tradable, dtype=bool)
        shape = (len(self.assets), len(self.days), len(FIELDS))
        if values.shape != shape:
            raise DataError('values has shape {}, expected {}'.format(
                values.shape, shape))
        if tradable.shape != shape[:2]:
            raise DataError('tradable has shape {}, expected {}'.format(
                tradable.shape, shape[:2]))
        if any(a >= b for a, b in zip(self.days, self.days[1:])):
            raise DataError('trading days must be strictly increasing')
        if not np.all(np.isfinite(values)):
            raise DataError('panel values must be finite')
        prices = values[:, :, :CLOSE + 1]
        if np.any(prices[tradable] <= 0):
            raise DataError('prices must be strictly positive where tradable')
        if np.any(values[:, :, VOLUME][tradable] < 0):
            raise DataError('volume must be non-negative')

        object.__setattr__(self, 'assets', tuple(self.assets))
        object.__setattr__(self, 'days', tuple(self.days))
        object.__setattr__(self, 'values', _freeze(values.copy()))
        object.__setattr__(self, 'tradable', _freeze(tradable.copy()))

    @property
    def n_assets(self):
        return len(self.assets)

    @property
    def n_days(self):
        return len(self.days)

    def field(self, name):
        """Returns the asset x day grid of one field."""
        return self.values[:, :, FIELDS.index(name)]

    def fields(self):
        """Returns a dict of every field's asset x day grid."""
        return {name: self.field(name) for name in FIELDS}


@dataclass(frozen=True, eq=False)
class ForwardReturns:
    """Simple returns over ``horizon`` trading days.

    Attributes
    ----------
    horizon: int
        Holding horizon in trading days.
    values: 2-D numpy array of floats
        ``close(t + horizon) / close(t) - 1``; 0 where not valid.
    valid: 2-D numpy array of bools
        False on the last ``horizon`` days and where either endpoint is
        untradable.
    """

    horizon: int
    values: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True, eq=False)
class FeaturePanel:
    """One feature's values over the panel grid.

    Attributes
    ----------
    name: string
        Identifier of the feature (an RPN string, a library name, or a
        network id).
    values: 2-D numpy array of floats
        ``values[asset, day]``; finite everywhere.
    valid: 2-D numpy array of bools
        Cells on which the feature is defined.
    """

    name: str
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        valid = np.asarray(self.valid, dtype=bool)
        if values.shape != valid.shape:
            raise DataError('feature {} values/valid shape mismatch'.format(
                self.name))
        values = np.where(valid & np.isfinite(values), values, 0.0)
        object.__setattr__(self, 'values', _freeze(values))
        object.__setattr__(self, 'valid', _freeze(valid.copy()))


@dataclass(frozen=True, eq=False)
class WindowDataset:
    """Standardized 30-day input windows with their forward returns.

    Attributes
    ----------
    window_len: int
        Days per window.
    input_dim: int
        ``5 * window_len``.
    samples: 3-D numpy array of floats
        ``samples[asset, day]`` is the standardized, flattened window
        ending at ``day`` (field-major, oldest day first); zeros where
        no sample exists.
    valid: 2-D numpy array of bools
        Cells carrying a sample (whole window tradable).
    returns: ForwardReturns
        Forward returns aligned with the samples.
    train_mean, train_std: 1-D numpy arrays of floats
        Per-coordinate statistics from training samples only.
    splits: dict of string to range
        Day-index ranges for 'train', 'val' and 'test'.
    min_cross_section: int
        Minimum valid pairs for a day to be eligible.
    scaling: string
        'raw' or 'relative'.

    Methods
    -------
    pair_mask(day)
        Assets with both a sample and a valid forward return that day.
    eligible_days(split)
        Days of a split with at least min_cross_section valid pairs.
    """

    window_len: int
    input_dim: int
    samples: np.ndarray
    valid: np.ndarray
    returns: ForwardReturns
    train_mean: np.ndarray
    train_std: np.ndarray
    splits: dict
    min_cross_section: int = 20
    scaling: str = 'raw'

    def pair_mask(self, day):
        return self.valid[:, day] & self.returns.valid[:, day]

    def eligible_days(self, split):
        if split not in self.splits:
            raise DataError('unknown split {!r}'.format(split))
        return [day for day in self.splits[split]
                if self.pair_mask(day).sum() >= self.min_cross_section]


@dataclass(frozen=True, eq=False)
class CrossSectionBatch:
    """Full cross-sections of a set of trading days.

    Attributes
    ----------
    day_indices: tuple of ints
        Distinct day indices, increasing.
    inputs: tuple of 2-D numpy arrays
        Per day, the (n_assets_that_day, input_dim) sample matrix.
    returns: tuple of 1-D numpy arrays
        Per day, the forward returns of the same assets.
    asset_indices: tuple of 1-D numpy arrays of ints
        Per day, which panel assets the rows belong to.
    """

    day_indices: tuple
    inputs: tuple
    returns: tuple
    asset_indices: tuple


def load_panel(path):
    """Reads a ``date,asset_id,open,high,low,close,volume`` CSV into a
    dense OhlcvPanel.

    Missing (date, asset) rows become untradable cells. Rows need not be
    sorted; assets and days are sorted on load.

    Parameters
    ----------
    path: string
        Path to the CSV file (UTF-8, header row required).

    Returns
    -------
    panel: OhlcvPanel
        The dense panel.

    Raises
    ------
    PanelFormatError
        On a missing header, a malformed row (with its line number), a
        non-positive price, a negative volume or a duplicate row.
    DataError
        If the file covers fewer than 2 distinct days.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False,
                            encoding='utf-8')
    except pd.errors.ParserError as err:
        raise PanelFormatError(str(err))
    except pd.errors.EmptyDataError:
        raise PanelFormatError('file is empty', 1)

    if [c.strip() for c in frame.columns] != PANEL_COLUMNS:
        raise PanelFormatError('header must be {}'.format(
            ','.join(PANEL_COLUMNS)), 1)
    frame.columns = PANEL_COLUMNS

    # line numbers: header is line 1
    line_numbers = np.arange(len(frame)) + 2

    dates = pd.to_datetime(frame['date'].str.strip(), format='%Y-%m-%d',
                           errors='coerce')
    bad = np.flatnonzero(dates.isna().to_numpy())
    if bad.size:
        raise PanelFormatError('invalid ISO-8601 date {!r}'.format(
            frame['date'].iloc[bad[0]]), line_numbers[bad[0]])

    asset_ids = frame['asset_id'].str.strip()
    bad = np.flatnonzero((asset_ids == '').to_numpy())
    if bad.size:
        raise PanelFormatError('empty asset_id', line_numbers[bad[0]])

    numeric = np.empty((len(frame), len(FIELDS)))
    for i, name in enumerate(FIELDS):
        column = pd.to_numeric(frame[name].str.strip(), errors='coerce')
        column = column.to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(column))
        if bad.size:
            raise PanelFormatError('{} is not a number: {!r}'.format(
                name, frame[name].iloc[bad[0]]), line_numbers[bad[0]])
        numeric[:, i] = column

    bad = np.flatnonzero(np.any(numeric[:, :VOLUME] <= 0, axis=1))
    if bad.size:
        raise PanelFormatError('non-positive price in a tradable row',
                               line_numbers[bad[0]])
    bad = np.flatnonzero(numeric[:, VOLUME] < 0)
    if bad.size:
        raise PanelFormatError('negative volume', line_numbers[bad[0]])

    iso_days = dates.dt.strftime('%Y-%m-%d').to_numpy()
    days = np.unique(iso_days)
    assets = np.unique(asset_ids.to_numpy())
    if days.size < 2:
        raise DataError('a panel needs at least 2 distinct days, got {}'
                        .format(days.size))

    day_idx = np.searchsorted(days, iso_days)
    asset_idx = np.searchsorted(assets, asset_ids.to_numpy())
    flat = asset_idx * days.size + day_idx
    seen, first = np.unique(flat, return_index=True)
    if seen.size != flat.size:
        duplicated = np.setdiff1d(np.arange(flat.size), first)[0]
        raise PanelFormatError('duplicate (date, asset_id) row',
                               line_numbers[duplicated])

    values = np.full((assets.size, days.size, len(FIELDS)), np.nan)
    values[asset_idx, day_idx] = numeric
    tradable = np.zeros((assets.size, days.size), dtype=bool)
    tradable[asset_idx, day_idx] = True

    values = _fill_holes(values, tradable)
    logger.info('Loaded %d assets x %d days from %s (%d untradable cells)',
                assets.size, days.size, path, int((~tradable).sum()))
    return OhlcvPanel(tuple(assets), tuple(days), values, tradable)


def _fill_holes(values, tradable):
    """Carries prices over untradable cells (forward, then backward) and
    zeroes their volume."""
    filled = values.copy()
    for i, name in enumerate(PRICE_FIELDS):
        grid = pd.DataFrame(values[:, :, i])
        filled[:, :, i] = grid.ffill(axis=1).bfill(axis=1).to_numpy()
    filled[:, :, VOLUME] = np.where(tradable, values[:, :, VOLUME], 0.0)
    return filled


def write_panel(panel, path):
    """Writes the tradable cells of a panel as a CSV sorted by
    (date, asset_id).

    Parameters
    ----------
    panel: OhlcvPanel
        The panel to write.
    path: string
        Output file path.
    """
    day_idx, asset_idx = np.nonzero(panel.tradable.T)
    frame = pd.DataFrame({
        'date': np.asarray(panel.days)[day_idx],
        'asset_id': np.asarray(panel.assets)[asset_idx]})
    for i, name in enumerate(FIELDS):
        frame[name] = panel.values[asset_idx, day_idx, i]
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info('Wrote panel to %s (%d rows)', path, len(frame))


def write_feature(feature, panel, path):
    """Writes a feature's valid cells as ``date,asset_id,value``.

    Parameters
    ----------
    feature: FeaturePanel
        The feature to write.
    panel: OhlcvPanel
        The panel the feature was computed on (for labels).
    path: string
        Output file path.
    """
    day_idx, asset_idx = np.nonzero(feature.valid.T)
    frame = pd.DataFrame({
        'date': np.asarray(panel.days)[day_idx],
        'asset_id': np.asarray(panel.assets)[asset_idx],
        'value': feature.values[asset_idx, day_idx]})
    frame.to_csv(path, index=False, lineterminator='\n')


def load_feature(path, panel, name=None):
    """Reads a ``date,asset_id,value`` CSV onto the grid of ``panel``.

    Cells absent from the file are invalid. Rows naming dates or assets
    the panel does not contain raise PanelFormatError.
    """
    try:
        frame = pd.read_csv(path, dtype={'date': str, 'asset_id': str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise PanelFormatError('{}: {}'.format(path, err))
    if list(frame.columns) != FEATURE_COLUMNS:
        raise PanelFormatError('{}: header must be {}'.format(
            path, ','.join(FEATURE_COLUMNS)), 1)

    day_lookup = {day: i for i, day in enumerate(panel.days)}
    asset_lookup = {asset: i for i, asset in enumerate(panel.assets)}
    values = np.zeros((panel.n_assets, panel.n_days))
    valid = np.zeros((panel.n_assets, panel.n_days), dtype=bool)
    for line, (day, asset, value) in enumerate(frame.itertuples(index=False),
                                               start=2):
        if day not in day_lookup or asset not in asset_lookup:
            raise PanelFormatError('{}: unknown date/asset {} {}'.format(
                path, day, asset), line)
        if not np.isfinite(value):
            raise PanelFormatError('{}: value is not finite'.format(path),
                                   line)
        values[asset_lookup[asset], day_lookup[day]] = value
        valid[asset_lookup[asset], day_lookup[day]] = True
    return FeaturePanel(name or path, values, valid)


def forward_return(panel, horizon):
    """Computes ``close(t + horizon) / close(t) - 1`` for every cell.

    Parameters
    ----------
    panel: OhlcvPanel
        Source panel.
    horizon: int
        Holding horizon in trading days (>= 1).

    Returns
    -------
    returns: ForwardReturns
        Valid only where both endpoints are tradable and in range.
    """
    if horizon < 1:
        raise DataError('horizon must be >= 1, got {}'.format(horizon))
    if horizon >= panel.n_days:
        raise DataError('horizon {} needs more than {} days'.format(
            horizon, panel.n_days))

    close = panel.field('close')
    values = np.zeros(close.shape)
    valid = np.zeros(close.shape, dtype=bool)
    values[:, :-horizon] = close[:, horizon:] / close[:, :-horizon] - 1.0
    valid[:, :-horizon] = panel.tradable[:, :-horizon] & \
        panel.tradable[:, horizon:]
    values[~valid] = 0.0
    return ForwardReturns(horizon, _freeze(values), _freeze(valid))


def window_mask(panel, window_len):
    """Marks the cells whose trailing ``window_len`` days are all
    tradable."""
    mask = np.zeros(panel.tradable.shape, dtype=bool)
    if window_len <= panel.n_days:
        windows = sliding_window_view(panel.tradable, window_len, axis=1)
        mask[:, window_len - 1:] = windows.all(axis=-1)
    return mask


def split_ranges(window_len, splits):
    """Day-index ranges of the train/val/test splits.

    The training range starts on the first day that can carry a full
    window; validation and test follow contiguously.
    """
    start = window_len - 1
    ranges = {}
    for name, length in zip(SPLIT_NAMES, splits):
        ranges[name] = range(start, start + length)
        start += length
    return ranges


def _raw_windows(panel, window_len, scaling):
    """Flattens every trailing window into a (asset, day, 5 * window_len)
    array, field-major and oldest day first."""
    n_assets, n_days = panel.n_assets, panel.n_days
    windows = sliding_window_view(panel.values, window_len, axis=1)
    # windows: (asset, day - window_len + 1, field, lag position)
    if scaling == 'relative':
        windows = np.array(windows)
        last_close = windows[:, :, CLOSE, -1][:, :, None, None]
        windows[:, :, :VOLUME] = windows[:, :, :VOLUME] / last_close
        mean_volume = windows[:, :, VOLUME].mean(axis=-1, keepdims=True)
        mean_volume[mean_volume == 0] = 1.0
        windows[:, :, VOLUME] = windows[:, :, VOLUME] / mean_volume
    elif scaling != 'raw':
        raise DataError('unknown window scaling {!r}'.format(scaling))

    flat = np.zeros((n_assets, n_days, len(FIELDS) * window_len))
    flat[:, window_len - 1:] = windows.reshape(
        n_assets, n_days - window_len + 1, -1)
    return flat


def build_windows(panel, window_len=30, splits=(250, 30, 30), horizon=5,
                  min_cross_section=20, scaling='raw'):
    """Builds the standardized input windows of every asset and day.

    Parameters
    ----------
    panel: OhlcvPanel
        Source panel.
    window_len: int
        Trading days per input window.
    splits: (int, int, int)
        Lengths of the train, validation and test splits.
    horizon: int
        Forward-return horizon.
    min_cross_section: int
        Minimum valid pairs for a day to be batch-eligible.
    scaling: string
        'raw' (the flattened block) or 'relative' (prices over the last
        close, volume over its window mean) before standardization.

    Returns
    -------
    ds: WindowDataset
        Samples standardized with training-split statistics only;
        coordinates with zero training variance are divided by 1.

    Raises
    ------
    DataError
        If the panel is shorter than ``window_len + sum(splits) + horizon``
        days or the training split holds no sample.
    """
    needed = window_len + sum(splits) + horizon
    if panel.n_days < needed:
        raise DataError('panel has {} days; window {} + splits {} + horizon '
                        '{} need {}'.format(panel.n_days, window_len,
                                            sum(splits), horizon, needed))

    returns = forward_return(panel, horizon)
    ranges = split_ranges(window_len, splits)
    valid = window_mask(panel, window_len)
    samples = _raw_windows(panel, window_len, scaling)

    in_train = np.zeros(panel.n_days, dtype=bool)
    in_train[ranges['train'].start:ranges['train'].stop] = True
    train_cells = valid & in_train[None, :]
    if not train_cells.any():
        raise DataError('the training split holds no complete window')

    train_samples = samples[train_cells]
    mean = train_samples.mean(axis=0)
    std = train_samples.std(axis=0)
    std[std == 0] = 1.0

    samples = (samples - mean) / std
    samples[~valid] = 0.0

    logger.info('Built %d windows (%d training) of %d inputs',
                int(valid.sum()), int(train_cells.sum()), samples.shape[-1])
    return WindowDataset(window_len=window_len,
                         input_dim=samples.shape[-1],
                         samples=_freeze(samples),
                         valid=_freeze(valid),
                         returns=returns,
                         train_mean=_freeze(mean),
                         train_std=_freeze(std),
                         splits=ranges,
                         min_cross_section=min_cross_section,
                         scaling=scaling)


def _batch_of(ds, days):
    inputs, rets, assets = [], [], []
    for day in days:
        mask = ds.pair_mask(day)
        idx = np.flatnonzero(mask)
        inputs.append(ds.samples[idx, day])
        rets.append(ds.returns.values[idx, day])
        assets.append(idx)
    return CrossSectionBatch(tuple(days), tuple(inputs), tuple(rets),
                             tuple(assets))


def sample_batch(ds, split, n_days, rng):
    """Draws ``n_days`` distinct eligible days of one split, uniformly.

    Parameters
    ----------
    ds: WindowDataset
        Source dataset.
    split: string
        'train', 'val' or 'test'.
    n_days: int
        Days per batch.
    rng: numpy.random.Generator
        Seeded generator; the batch is a pure function of its state.

    Returns
    -------
    batch: CrossSectionBatch
        The full valid cross-section of each drawn day.

    Raises
    ------
    DataError
        If fewer than ``n_days`` days of the split are eligible.
    """
    eligible = ds.eligible_days(split)
    if len(eligible) < n_days:
        raise DataError('split {!r} has {} eligible days (>= {} assets), '
                        'need {}'.format(split, len(eligible),
                                         ds.min_cross_section, n_days))
    chosen = rng.choice(len(eligible), size=n_days, replace=False)
    days = sorted(eligible[i] for i in chosen)
    return _batch_of(ds, days)


def split_batch(ds, split):
    """Returns every eligible day of a split as one CrossSectionBatch."""
    return _batch_of(ds, ds.eligible_days(split))
