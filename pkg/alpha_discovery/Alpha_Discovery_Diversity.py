#!/usr/bin/env python

"""This module measures how diverse a set of features is.

For every day, each feature's cross-section is turned into a
probability distribution by a softmax, the distributions are clustered
with k-means, and the day's diversity is the mean distance between the
cluster centers. Four distances are available: euclidean, cross
entropy (symmetrized KL by default, the raw symmetrized cross entropy
behind a flag), one minus cosine and one minus Pearson correlation.
Clustering always runs under squared euclidean distance; the metric only
measures center-to-center distances.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> report = diversity_score(features, ds.splits['test'])
    >>> report.mean, report.std

Output
-------
    ``write_diversity_report`` writes ``diversity_report.csv`` with the
    columns metric, k, day, score, closed by a ``mean`` and a ``std``
    row per report.

Dependencies
------------
    This module depends on numpy, pandas, scipy and scikit-learn.
"""

from collections import namedtuple
from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.special import softmax
from sklearn.cluster import kmeans_plusplus

from alpha_discovery.Alpha_Discovery_Errors import ConfigError, DataError

logger = logging.getLogger(__name__)

METRICS = ('euclidean', 'cross_entropy', 'one_minus_cos', 'one_minus_corr')
DEFAULT_METRIC = 'cross_entropy'
LOG_FLOOR = 1e-12
MAX_ITER = 100
REPORT_COLUMNS = ['metric', 'k', 'day', 'score']


@dataclass(frozen=True)
class DiversityConfig:
    """Diversity settings.

    Attributes
    ----------
    metric: string
        One of METRICS.
    k_fraction: float
        Cluster count as a fraction of the feature count.
    raw_cross_entropy: bool
        Use the raw symmetrized cross entropy instead of symmetrized KL.
    """

    metric: str = DEFAULT_METRIC
    k_fraction: float = 0.1
    raw_cross_entropy: bool = False

    def validate(self):
        if self.metric not in METRICS:
            raise ConfigError('diversity.metric', 'must be one of {}'.format(
                ', '.join(METRICS)))
        if not 0 < self.k_fraction <= 1:
            raise ConfigError('diversity.k_fraction', 'must lie in (0, 1]')


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Pairwise distances under one metric.

    Attributes
    ----------
    metric: string
        Metric id.
    values: 2-D numpy array
        Symmetric, non-negative m x m matrix.
    """

    metric: str
    values: np.ndarray


KMeansResult = namedtuple('KMeansResult', ['centers', 'labels', 'sse',
                                           'iterations'])
KMeansResult.__doc__ = """Outcome of Lloyd's algorithm.

centers: (k, n) array; labels: (m,) cluster index of every row;
sse: list of within-cluster squared errors after each assignment;
iterations: assignment steps run.
"""

DiversityReport = namedtuple('DiversityReport', ['metric', 'k', 'days',
                                                 'scores', 'mean', 'std'])
DiversityReport.__doc__ = """Per-day diversity of a feature set.

metric: metric id; k: cluster count; days: tuple of day indices;
scores: 1-D array of per-day scores; mean, std: over those days.
"""


def _common_mask(features, day):
    mask = np.ones(features[0].valid.shape[0], dtype=bool)
    for feature in features:
        mask &= feature.valid[:, day]
    return mask


def daily_softmax(feature, day, mask=None):
    """Softmax of one feature's valid cross-section on one day.

    Parameters
    ----------
    feature: FeaturePanel
        The feature.
    day: int
        Day index.
    mask: 1-D numpy array of bools
        Further restricts the cross-section.

    Raises
    ------
    DataError
        If fewer than 2 assets are valid.
    """
    valid = feature.valid[:, day] if mask is None \
        else feature.valid[:, day] & mask
    if valid.sum() < 2:
        raise DataError('feature {} has {} valid assets on day {}, need 2'
                        .format(feature.name, int(valid.sum()), day))
    return softmax(feature.values[valid, day])


def daily_distributions(features, day):
    """The m x n matrix of softmaxed cross-sections over the assets
    valid in every feature that day."""
    features = list(features)
    mask = _common_mask(features, day)
    return np.vstack([daily_softmax(f, day, mask) for f in features])


def _kl_terms(a, b, raw):
    """Elementwise symmetrized (cross) entropy between rows of a and b."""
    log_a = np.log(np.maximum(a, LOG_FLOOR))[:, None, :]
    log_b = np.log(np.maximum(b, LOG_FLOOR))[None, :, :]
    pa = a[:, None, :]
    pb = b[None, :, :]
    if raw:
        return -0.5 * ((pa * log_b).sum(axis=-1) + (pb * log_a).sum(axis=-1))
    return 0.5 * ((pa * (log_a - log_b)).sum(axis=-1) +
                  (pb * (log_b - log_a)).sum(axis=-1))


def _flat_rows_distance(a, b, values):
    """Correlation distance is undefined for constant rows: 0 between
    equal rows, 1 otherwise."""
    undefined = ~np.isfinite(values)
    for i, j in zip(*np.nonzero(undefined)):
        values[i, j] = 0.0 if np.array_equal(a[i], b[j]) else 1.0
    return values


def distances(a, b, metric, raw_cross_entropy=False):
    """Distances between every row of ``a`` and every row of ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    with np.errstate(invalid='ignore', divide='ignore'):
        if metric == 'euclidean':
            values = cdist(a, b, 'euclidean')
        elif metric == 'one_minus_cos':
            values = cdist(a, b, 'cosine')
        elif metric == 'one_minus_corr':
            values = _flat_rows_distance(a, b, cdist(a, b, 'correlation'))
        elif metric == 'cross_entropy':
            values = _kl_terms(a, b, raw_cross_entropy)
        else:
            raise ConfigError('diversity.metric', 'unknown metric {!r}'
                              .format(metric))
    if metric == 'cross_entropy' and raw_cross_entropy:
        return values
    return np.maximum(values, 0.0)


def pairwise_distance(dists, metric=DEFAULT_METRIC, raw_cross_entropy=False):
    """Pairwise distances between feature distributions.

    Parameters
    ----------
    dists: 2-D numpy array or list of them
        One m x n distribution matrix, or one per day; per-day matrices
        are averaged.
    metric: string
        One of METRICS.
    raw_cross_entropy: bool
        Raw symmetrized cross entropy instead of symmetrized KL.

    Returns
    -------
    matrix: DistanceMatrix
        Symmetric; zero diagonal except for raw cross entropy, whose
        diagonal holds each distribution's entropy.
    """
    days = [dists] if isinstance(dists, np.ndarray) else list(dists)
    if not days or days[0].shape[0] < 2:
        raise DataError('pairwise distances need at least 2 features')
    total = np.zeros((days[0].shape[0], days[0].shape[0]))
    for matrix in days:
        values = distances(matrix, matrix, metric, raw_cross_entropy)
        total += 0.5 * (values + values.T)
    total /= len(days)
    if not (metric == 'cross_entropy' and raw_cross_entropy):
        np.fill_diagonal(total, 0.0)
    return DistanceMatrix(metric, total)


def default_k(m, k_fraction=0.1):
    """Cluster count ``max(2, round(k_fraction * m))``, capped at m."""
    return min(m, max(2, int(round(k_fraction * m))))


def _assign(x, centers):
    squared = cdist(x, centers, 'sqeuclidean')
    labels = np.argmin(squared, axis=1)
    return labels, float(squared[np.arange(x.shape[0]), labels].sum())


def kmeans_centers(dists, k, rng, max_iter=MAX_ITER):
    """Lloyd's k-means with k-means++ seeding.

    Parameters
    ----------
    dists: 2-D numpy array
        One row per feature.
    k: int
        Cluster count, 1 <= k <= m.
    rng: numpy.random.Generator
        Seeds the k-means++ draw.
    max_iter: int
        Assignment steps at most.

    Returns
    -------
    result: KMeansResult
        Stops when assignments no longer change. Empty clusters keep
        their previous center.
    """
    x = np.asarray(dists, dtype=float)
    m = x.shape[0]
    if not 1 <= k <= m:
        raise DataError('k = {} outside 1..{}'.format(k, m))
    seed = int(rng.integers(np.iinfo(np.int32).max))
    centers, _ = kmeans_plusplus(x, k, random_state=seed)
    centers = np.array(centers, dtype=float)

    labels, sse_history = None, []
    for iteration in range(1, max_iter + 1):
        new_labels, sse = _assign(x, centers)
        sse_history.append(sse)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for cluster in range(k):
            members = x[labels == cluster]
            if len(members):
                centers[cluster] = members.mean(axis=0)
    return KMeansResult(centers, labels, sse_history, iteration)


def _center_score(centers, metric, raw_cross_entropy):
    k = centers.shape[0]
    if k < 2:
        return 0.0
    values = distances(centers, centers, metric, raw_cross_entropy)
    values = 0.5 * (values + values.T)
    return float(values[np.triu_indices(k, 1)].mean())


def diversity_score(features, days, metric=DEFAULT_METRIC, k=None,
                    k_fraction=0.1, seed=0, raw_cross_entropy=False):
    """Per-day mean distance between k-means centers of a feature set.

    Parameters
    ----------
    features: list of FeaturePanel
        At least two features.
    days: iterable of ints
        Days to score, usually the test split.
    metric: string
        Center-to-center distance, one of METRICS.
    k: int
        Cluster count; defaults to ``default_k(m, k_fraction)``.
    seed: int
        Root seed; day t clusters with ``default_rng([seed, t])``.

    Returns
    -------
    report: DiversityReport
    """
    features = list(features)
    if len(features) < 2:
        raise DataError('diversity needs at least 2 features, got {}'
                        .format(len(features)))
    k = k or default_k(len(features), k_fraction)
    days = tuple(days)
    scores = []
    for day in days:
        dists = daily_distributions(features, day)
        rng = np.random.default_rng([seed, day])
        result = kmeans_centers(dists, k, rng)
        scores.append(_center_score(result.centers, metric,
                                    raw_cross_entropy))
    scores = np.asarray(scores)
    mean = float(scores.mean()) if scores.size else 0.0
    std = float(scores.std()) if scores.size else 0.0
    logger.info('Diversity (%s, k=%d) of %d features over %d days: '
                '%.4f +/- %.4f', metric, k, len(features), len(days), mean,
                std)
    return DiversityReport(metric, k, days, scores, mean, std)


def report_frame(report, panel):
    """Rows (metric, k, day, score) of one report, plus mean and std."""
    rows = [(report.metric, report.k, panel.days[day], float(score))
            for day, score in zip(report.days, report.scores)]
    rows.append((report.metric, report.k, 'mean', report.mean))
    rows.append((report.metric, report.k, 'std', report.std))
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_diversity_report(reports, panel, path):
    """Writes one or more DiversityReports to ``path``."""
    if isinstance(reports, DiversityReport):
        reports = [reports]
    frame = pd.concat([report_frame(r, panel) for r in reports],
                      ignore_index=True)
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info('Wrote diversity report to %s', path)
