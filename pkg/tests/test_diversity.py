"""Tests for distribution distances, k-means and the diversity score."""

import numpy as np
import pandas as pd
import pytest
from scipy.special import softmax

from alpha_discovery.Alpha_Discovery_Diversity import DiversityConfig, \
    daily_distributions, daily_softmax, default_k, distances, \
    diversity_score, kmeans_centers, pairwise_distance, \
    write_diversity_report
from alpha_discovery.Alpha_Discovery_Errors import ConfigError, DataError
from alpha_discovery.Alpha_Discovery_Market_Data import FeaturePanel

from conftest import make_panel


def _features(m, shape=(12, 6), seed=0):
    rng = np.random.default_rng(seed)
    valid = np.ones(shape, dtype=bool)
    return [FeaturePanel('f{}'.format(i), rng.standard_normal(shape), valid)
            for i in range(m)]


class TestDistributions:

    def test_softmax_sums_to_one(self):
        feature = _features(1)[0]
        p = daily_softmax(feature, 2)
        assert p.sum() == pytest.approx(1.0)
        assert np.all(p > 0)

    def test_common_cross_section(self):
        a, b = _features(2)
        valid = np.ones(a.valid.shape, dtype=bool)
        valid[3, 1] = False
        b = FeaturePanel('b', b.values, valid)
        dists = daily_distributions([a, b], 1)
        assert dists.shape == (2, 11)
        np.testing.assert_allclose(dists.sum(axis=1), 1.0)

    def test_too_few_assets(self):
        valid = np.zeros((4, 3), dtype=bool)
        valid[0] = True
        feature = FeaturePanel('thin', np.ones((4, 3)), valid)
        with pytest.raises(DataError):
            daily_softmax(feature, 0)


class TestDistances:

    def test_euclidean(self):
        d = distances([[0.0, 0.0]], [[3.0, 4.0]], 'euclidean')
        assert d[0, 0] == pytest.approx(5.0)

    def test_cosine_of_orthogonal_rows(self):
        d = distances([[1.0, 0.0]], [[0.0, 1.0]], 'one_minus_cos')
        assert d[0, 0] == pytest.approx(1.0)

    def test_correlation_of_flat_rows(self):
        flat = [[0.25, 0.25, 0.25, 0.25]]
        other = [[0.1, 0.2, 0.3, 0.4]]
        assert distances(flat, flat, 'one_minus_corr')[0, 0] == 0.0
        assert distances(flat, other, 'one_minus_corr')[0, 0] == 1.0

    def test_symmetrized_kl(self):
        p = np.array([[0.5, 0.3, 0.2]])
        q = np.array([[0.2, 0.2, 0.6]])
        expected = 0.5 * (np.sum(p * np.log(p / q)) +
                          np.sum(q * np.log(q / p)))
        assert distances(p, q, 'cross_entropy')[0, 0] == pytest.approx(
            expected)
        assert distances(p, p, 'cross_entropy')[0, 0] == pytest.approx(0.0)

    def test_unknown_metric(self):
        with pytest.raises(ConfigError):
            distances([[1.0]], [[1.0]], 'manhattan')

    @pytest.mark.parametrize('metric', ['euclidean', 'cross_entropy',
                                        'one_minus_cos', 'one_minus_corr'])
    def test_pairwise_matrix(self, metric):
        rng = np.random.default_rng(1)
        dists = softmax(rng.standard_normal((5, 8)), axis=1)
        matrix = pairwise_distance(dists, metric).values
        np.testing.assert_allclose(matrix, matrix.T)
        np.testing.assert_allclose(np.diag(matrix), 0.0)
        assert np.all(matrix >= 0)

    def test_raw_cross_entropy_diagonal_is_entropy(self):
        uniform = np.full((2, 4), 0.25)
        matrix = pairwise_distance(uniform, 'cross_entropy',
                                   raw_cross_entropy=True).values
        np.testing.assert_allclose(np.diag(matrix), np.log(4.0))

    def test_pairwise_averages_days(self):
        rng = np.random.default_rng(2)
        days = [softmax(rng.standard_normal((3, 6)), axis=1)
                for _ in range(4)]
        averaged = pairwise_distance(days, 'euclidean').values
        expected = np.mean([pairwise_distance(d, 'euclidean').values
                            for d in days], axis=0)
        np.testing.assert_allclose(averaged, expected)


class TestKMeans:

    def test_default_k(self):
        assert default_k(20) == 2
        assert default_k(100) == 10
        assert default_k(1) == 1
        assert default_k(3, 1.0) == 3

    def test_two_blobs(self):
        rng = np.random.default_rng(3)
        x = np.vstack([rng.normal(0.0, 0.1, (10, 2)),
                       rng.normal(5.0, 0.1, (10, 2))])
        result = kmeans_centers(x, 2, np.random.default_rng(0))
        assert len(set(result.labels[:10])) == 1
        assert len(set(result.labels[10:])) == 1
        assert result.labels[0] != result.labels[10]
        assert np.all(np.diff(result.sse) <= 1e-12)

    def test_seeded(self):
        x = np.random.default_rng(4).standard_normal((15, 3))
        first = kmeans_centers(x, 3, np.random.default_rng(7))
        second = kmeans_centers(x, 3, np.random.default_rng(7))
        np.testing.assert_array_equal(first.centers, second.centers)

    def test_bad_k(self):
        with pytest.raises(DataError):
            kmeans_centers(np.zeros((3, 2)), 4, np.random.default_rng(0))


class TestDiversityScore:

    def test_two_features_score_their_distance(self):
        features = _features(2)
        report = diversity_score(features, range(6), 'euclidean')
        assert report.k == 2
        for day, score in zip(report.days, report.scores):
            p, q = daily_distributions(features, day)
            assert score == pytest.approx(np.linalg.norm(p - q))
        assert report.mean == pytest.approx(report.scores.mean())

    def test_opposites_are_more_diverse_than_near_copies(self):
        base = _features(1)[0]
        noise = np.random.default_rng(5).standard_normal(base.values.shape)
        near = FeaturePanel('near', base.values + 1e-3 * noise, base.valid)
        opposite = FeaturePanel('opposite', -base.values, base.valid)
        low = diversity_score([base, near], range(6))
        high = diversity_score([base, opposite], range(6))
        assert high.mean > low.mean

    def test_seeded(self):
        features = _features(10)
        first = diversity_score(features, range(6), seed=3)
        second = diversity_score(features, range(6), seed=3)
        np.testing.assert_array_equal(first.scores, second.scores)

    def test_cluster_fraction_barely_moves_the_score(self):
        rng = np.random.default_rng(6)
        base = rng.standard_normal((2, 40, 8))
        valid = np.ones((40, 8), dtype=bool)
        # one feature per angle of a plane of signals
        angles = np.linspace(0.0, 2 * np.pi, 100, endpoint=False)
        features = [FeaturePanel('f{}'.format(i), 0.5 * (np.cos(a) * base[0] +
                                                         np.sin(a) * base[1]),
                                 valid)
                    for i, a in enumerate(angles)]
        low = diversity_score(features, range(8), k_fraction=0.05)
        high = diversity_score(features, range(8), k_fraction=0.15)
        assert (low.k, high.k) == (5, 15)
        assert abs(low.mean - high.mean) <= 0.25 * max(low.mean, high.mean)

    def test_needs_two_features(self):
        with pytest.raises(DataError):
            diversity_score(_features(1), range(6))

    def test_report_file(self, tmp_path):
        panel = make_panel(n_assets=12, n_days=6)
        report = diversity_score(_features(4), range(6))
        path = str(tmp_path / 'diversity_report.csv')
        write_diversity_report(report, panel, path)
        frame = pd.read_csv(path, dtype={'day': str})
        assert list(frame.columns) == ['metric', 'k', 'day', 'score']
        assert list(frame['day'].iloc[-2:]) == ['mean', 'std']
        assert frame['day'].iloc[0] == panel.days[0]
        assert frame['score'].iloc[-2] == pytest.approx(report.mean)


class TestDiversityConfig:

    def test_invalid(self):
        with pytest.raises(ConfigError):
            DiversityConfig(metric='manhattan').validate()
        with pytest.raises(ConfigError):
            DiversityConfig(k_fraction=0.0).validate()
