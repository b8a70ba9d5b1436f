"""Tests for the network, its surrogate loss, training and checkpoints."""

import numpy as np
import pandas as pd
import pytest

from alpha_discovery.Alpha_Discovery_DSL import CLASSICAL_FEATURES, \
    classical_feature
from alpha_discovery.Alpha_Discovery_Errors import ConfigError, DataError, \
    TrainingError
from alpha_discovery.Alpha_Discovery_Market_Data import CrossSectionBatch, \
    FeaturePanel, build_windows
from alpha_discovery.Alpha_Discovery_Network import CONTRIB_COLUMNS, \
    AdamOptimizer, KernelParams, MlpNetwork, TrainConfig, \
    compression_holds, compression_threshold, contribution, g_kernel, \
    load_network, loss_and_gradients, network_feature, pretrain, \
    random_teacher, save_network, split_ic_of, surrogate_ic_loss, \
    teacher_fidelity, train, train_step, write_contrib_trace
from alpha_discovery.Alpha_Discovery_Synthetic import SynthConfig, \
    generate_synthetic_panel

from conftest import WINDOW

FAST = TrainConfig(lr=1e-2, batch_days=5, batches_per_epoch=3, max_epochs=4,
                   patience=2, pretrain_epochs=30, fidelity=0.99,
                   random_pretrain_epochs=2, hidden_sizes=(8, 4))


def _net(input_dim, seed=0, hidden=(8, 4)):
    return MlpNetwork.initialize([input_dim] + list(hidden) + [1],
                                 np.random.default_rng(seed))


def _batch(rng, n_days=3, n_assets=9, input_dim=6):
    inputs = tuple(rng.standard_normal((n_assets, input_dim))
                   for _ in range(n_days))
    returns = tuple(rng.standard_normal(n_assets) for _ in range(n_days))
    assets = tuple(np.arange(n_assets) for _ in range(n_days))
    return CrossSectionBatch(tuple(range(n_days)), inputs, returns, assets)


class TestKernel:

    def test_range_and_order(self):
        x = np.array([-3.0, 0.5, 1.0, 1.5, 7.0])
        g = g_kernel(x)
        assert np.all((g > 0) & (g < 1))
        assert np.all(np.diff(g) > 0)

    def test_half_at_mean(self):
        g = g_kernel([1.0, 2.0, 3.0])
        assert g[1] == pytest.approx(0.5)

    def test_constant_input(self):
        np.testing.assert_allclose(g_kernel(np.full(4, 2.0)), 0.5)

    def test_two_std_point(self):
        x = np.array([2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert x.mean() == 0.0 and x.std() == 1.0
        assert g_kernel(x)[0] == pytest.approx(1.0 / (1.0 + np.exp(-1.83)),
                                               abs=1e-5)
        assert g_kernel(x)[0] == pytest.approx(0.86175, abs=1e-4)

    def test_strictly_increasing_on_random_vectors(self):
        rng = np.random.default_rng(11)
        for _ in range(10000):
            x = np.sort(rng.standard_normal(12) * rng.uniform(0.1, 10.0))
            assert np.all(np.diff(g_kernel(x)) > 0)

    def test_anomalies_keep_their_rank(self):
        x = np.array([-20.0, -2, -1, 1, 2, 3, 4, 5, 6, 7, 20])
        g = g_kernel(x)
        np.testing.assert_array_equal(np.argsort(g), np.arange(11))
        # the outliers land closer to their neighbours than in x
        assert (g[1] - g[0]) / (g[2] - g[1]) < (x[1] - x[0]) / (x[2] - x[1])

    def test_empty(self):
        with pytest.raises(DataError):
            g_kernel([])

    def test_compression_threshold(self):
        assert compression_threshold(1.83) == pytest.approx(0.3618, abs=1e-4)
        assert compression_holds(1.0, 0.37)
        assert not compression_holds(1.0, 0.35)


class TestSurrogateLoss:

    def test_output_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(12)
        r = rng.standard_normal(12)
        params = KernelParams()
        result = surrogate_ic_loss([x], [r], params)
        step = 1e-6
        numeric = np.empty_like(x)
        for i in range(x.size):
            up, down = x.copy(), x.copy()
            up[i] += step
            down[i] -= step
            numeric[i] = (surrogate_ic_loss([up], [r], params).loss -
                          surrogate_ic_loss([down], [r], params).loss) / \
                (2 * step)
        np.testing.assert_allclose(result.gradients[0], numeric, rtol=1e-4,
                                   atol=1e-8)

    def test_gradient_on_random_three_day_batches(self):
        rng = np.random.default_rng(21)
        params = KernelParams()
        step = 1e-5
        for _ in range(10):
            outputs = [rng.standard_normal(20) for _ in range(3)]
            returns = [rng.standard_normal(20) for _ in range(3)]
            analytic = surrogate_ic_loss(outputs, returns, params).gradients
            worst = 0.0
            for day in range(3):
                numeric = np.empty(20)
                for i in range(20):
                    up = [x.copy() for x in outputs]
                    down = [x.copy() for x in outputs]
                    up[day][i] += step
                    down[day][i] -= step
                    numeric[i] = (
                        surrogate_ic_loss(up, returns, params).loss -
                        surrogate_ic_loss(down, returns, params).loss) / \
                        (2 * step)
                scale = np.abs(numeric).max()
                worst = max(worst,
                            np.abs(analytic[day] - numeric).max() / scale)
            assert worst < 1e-4

    def test_ordered_outputs_score_near_minus_one(self):
        r = np.linspace(-0.05, 0.05, 20)
        result = surrogate_ic_loss([np.arange(20.0)], [r])
        assert result.loss < -0.9
        assert result.degenerate == [False]

    def test_constant_outputs_are_degenerate(self):
        result = surrogate_ic_loss([np.ones(5)], [np.arange(5.0)])
        assert result.loss == 0.0
        assert result.degenerate == [True]
        assert not result.gradients[0].any()

    def test_mismatched_days(self):
        with pytest.raises(TrainingError):
            surrogate_ic_loss([np.ones(3)], [np.ones(4)])

    def test_parameter_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        net = _net(6, seed=1)
        batch = _batch(rng)
        result = loss_and_gradients(net, batch)
        step = 1e-6
        for layer, (i, j) in [(0, (0, 0)), (0, (5, 7)), (1, (3, 2)),
                              (2, (1, 0))]:
            original = net.weights[layer][i, j]
            net.weights[layer][i, j] = original + step
            up = loss_and_gradients(net, batch).loss
            net.weights[layer][i, j] = original - step
            down = loss_and_gradients(net, batch).loss
            net.weights[layer][i, j] = original
            assert result.weight_grads[layer][i, j] == pytest.approx(
                (up - down) / (2 * step), rel=1e-4, abs=1e-8)

    def test_every_parameter_of_a_tiny_network(self):
        rng = np.random.default_rng(22)
        step = 1e-5
        for seed in range(10):
            net = _net(5, seed=seed, hidden=(3,))
            batch = _batch(rng, n_days=2, n_assets=6, input_dim=5)
            result = loss_and_gradients(net, batch)
            params = net.weights + net.biases
            analytic = result.weight_grads + result.bias_grads
            for param, grad in zip(params, analytic):
                numeric = np.empty_like(param)
                for index in np.ndindex(param.shape):
                    original = param[index]
                    param[index] = original + step
                    up = loss_and_gradients(net, batch).loss
                    param[index] = original - step
                    down = loss_and_gradients(net, batch).loss
                    param[index] = original
                    numeric[index] = (up - down) / (2 * step)
                # the output bias has zero gradient: the loss ignores shifts
                assert np.abs(grad - numeric).max() <= \
                    1e-4 * np.abs(numeric).max() + 1e-9


class TestNetwork:

    def test_shapes(self):
        net = _net(6)
        assert net.sizes == [6, 8, 4, 1]
        assert net.weights[0].shape == (6, 8)
        assert net.forward(np.zeros((3, 6))).shape == (3,)

    def test_dimension_mismatch(self):
        with pytest.raises(TrainingError):
            _net(6).forward(np.zeros((3, 5)))

    def test_copy_is_independent(self):
        net = _net(6)
        twin = net.copy()
        twin.weights[0][0, 0] += 1.0
        assert net.weights[0][0, 0] != twin.weights[0][0, 0]

    def test_train_step_lowers_loss_on_a_fixed_batch(self):
        rng = np.random.default_rng(9)
        net = _net(6, seed=2)
        batch = _batch(rng)
        optimizer = AdamOptimizer(net, lr=1e-2)
        first = loss_and_gradients(net, batch).loss
        for _ in range(100):
            net, _ = train_step(net, batch, optimizer)
        assert loss_and_gradients(net, batch).loss < first

    def test_contribution(self):
        window = 3
        net = _net(5 * window)
        net.weights[0][:] = np.arange(5 * window)[:, None]
        contrib = contribution(net, window)
        np.testing.assert_allclose(contrib.values, 8 * np.arange(15))
        np.testing.assert_allclose(contrib.by_field,
                                   8 * np.array([3, 12, 21, 30, 39]))
        # lag 0 is the last day of every field block
        assert contrib.by_lag[0] == pytest.approx(8 * (2 + 5 + 8 + 11 + 14))

    def test_contribution_bad_window(self):
        with pytest.raises(TrainingError):
            contribution(_net(14))


class TestCheckpoint:

    def test_saved_network_reloads(self, tmp_path):
        net = _net(6, seed=3)
        path = str(tmp_path / 'net.bin')
        save_network(net, path)
        loaded = load_network(path)
        assert loaded.sizes == net.sizes
        for a, b in zip(loaded.weights + loaded.biases,
                        net.weights + net.biases):
            np.testing.assert_array_equal(a, b)
        x = np.random.default_rng(0).standard_normal((4, 6))
        np.testing.assert_array_equal(loaded.forward(x), net.forward(x))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / 'net.bin'
        path.write_bytes(b'NOTANET!' + b'\0' * 16)
        with pytest.raises(DataError):
            load_network(str(path))

    def test_truncated(self, tmp_path):
        net = _net(6)
        path = str(tmp_path / 'net.bin')
        save_network(net, path)
        with open(path, 'rb') as f:
            blob = f.read()
        with open(path, 'wb') as f:
            f.write(blob[:-8])
        with pytest.raises(DataError):
            load_network(path)


class TestTraining:

    def test_pretrain_moves_towards_teacher(self, panel, ds):
        teacher = classical_feature('momentum_5', panel, WINDOW)
        net = _net(ds.input_dim, seed=4)
        before = teacher_fidelity(net, teacher, ds)
        net = pretrain(net, teacher, ds, FAST, np.random.default_rng(0))
        assert teacher_fidelity(net, teacher, ds) > before

    def test_pretrain_needs_a_defined_teacher(self, ds):
        teacher = FeaturePanel('empty', np.ones(ds.valid.shape),
                               np.zeros(ds.valid.shape, dtype=bool))
        with pytest.raises(DataError):
            pretrain(_net(ds.input_dim), teacher, ds, FAST,
                     np.random.default_rng(0))

    def test_train_returns_best_epoch(self, ds):
        net = _net(ds.input_dim, seed=5)
        best, history = train(net, ds, FAST, KernelParams(),
                              np.random.default_rng(1))
        assert 1 <= len(history) <= FAST.max_epochs
        best_ic = max(record.val_ic for record in history)
        assert split_ic_of(best, ds, 'val') == pytest.approx(best_ic)
        assert history[0].contribution.values.size == ds.input_dim

    def test_train_is_seeded(self, ds):
        runs = [train(_net(ds.input_dim, seed=5), ds, FAST, KernelParams(),
                      np.random.default_rng(1))[0] for _ in range(2)]
        np.testing.assert_array_equal(runs[0].weights[0], runs[1].weights[0])

    @pytest.mark.slow
    def test_correlation_training_finds_the_signal(self, ds):
        cfg = TrainConfig(lr=1e-2, batch_days=5, batches_per_epoch=10,
                          max_epochs=30, patience=10, hidden_sizes=(8, 4))
        net = _net(ds.input_dim, seed=6)
        best, _ = train(net, ds, cfg, KernelParams(),
                        np.random.default_rng(2))
        assert split_ic_of(best, ds, 'val') > 0.2

    def test_network_feature(self, ds):
        net = _net(ds.input_dim)
        feature = network_feature(net, ds, 'C001')
        day = ds.splits['test'][0]
        mask = ds.valid[:, day]
        np.testing.assert_allclose(feature.values[mask, day],
                                   net.forward(ds.samples[mask, day]))
        np.testing.assert_array_equal(feature.valid, ds.valid)

    def test_random_teachers(self, ds):
        rng = np.random.default_rng(0)
        normal = random_teacher(ds, rng)
        assert normal.name == 'random_normal'
        np.testing.assert_array_equal(normal.valid, ds.valid)
        net_teacher = random_teacher(ds, rng, 'network', (4,))
        assert net_teacher.name == 'random_network'
        with pytest.raises(ConfigError):
            random_teacher(ds, rng, 'uniform')

    def test_contrib_trace(self, tmp_path, ds):
        net = _net(ds.input_dim)
        _, history = train(net, ds, TrainConfig(max_epochs=2, patience=1,
                                                batch_days=5,
                                                batches_per_epoch=1,
                                                hidden_sizes=(8, 4)),
                           KernelParams(), np.random.default_rng(3))
        path = str(tmp_path / 'contrib_trace.csv')
        write_contrib_trace({'B001': history}, path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == CONTRIB_COLUMNS
        assert len(frame) == len(history) * ds.input_dim
        last_close = frame[(frame['field'] == 'close') & (frame['lag'] == 0)]
        assert set(last_close['input_index']) == {3 * WINDOW + WINDOW - 1}


class TestTrainConfig:

    @pytest.mark.parametrize('changes, field', [
        ({'patience': 200}, 'adnn.patience'),
        ({'beta1': 1.0}, 'adnn.beta1'),
        ({'batch_days': 0}, 'adnn.batch_days'),
        ({'fidelity': 1.5}, 'adnn.fidelity'),
        ({'hidden_sizes': ()}, 'adnn.hidden_sizes')])
    def test_invalid(self, changes, field):
        with pytest.raises(ConfigError) as err:
            TrainConfig(**changes).validate()
        assert err.value.field == field

    def test_kernel_invalid(self):
        with pytest.raises(ConfigError):
            KernelParams(p=0.0).validate()


@pytest.fixture(scope='module')
def wide_ds():
    synth = generate_synthetic_panel(SynthConfig(n_assets=50, n_days=115,
                                                 seed=2),
                                     30, (60, 10, 10), 5, 10)
    return synth.panel, build_windows(synth.panel, 30, (60, 10, 10), 5, 10,
                                      scaling='relative')


@pytest.mark.slow
class TestClassicalTeachers:

    CFG = TrainConfig(lr=3e-3, batch_days=10, batches_per_epoch=3,
                      max_epochs=3, patience=2, pretrain_epochs=300)

    @pytest.mark.parametrize('name', list(CLASSICAL_FEATURES))
    def test_pretraining_reaches_fidelity(self, wide_ds, name):
        panel, ds = wide_ds
        teacher = classical_feature(name, panel, ds.window_len)
        net = MlpNetwork.initialize([ds.input_dim, 64, 32, 1],
                                    np.random.default_rng(0))
        net = pretrain(net, teacher, ds, self.CFG, np.random.default_rng(1))
        assert teacher_fidelity(net, teacher, ds) >= 0.9

    def test_trained_contributions_stay_distinct(self, wide_ds):
        panel, ds = wide_ds
        vectors = []
        for seed, name in enumerate(CLASSICAL_FEATURES):
            net = MlpNetwork.initialize([ds.input_dim, 64, 32, 1],
                                        np.random.default_rng(seed))
            teacher = classical_feature(name, panel, ds.window_len)
            cfg = TrainConfig(lr=3e-3, batch_days=10, batches_per_epoch=3,
                              max_epochs=3, patience=2, pretrain_epochs=20)
            net = pretrain(net, teacher, ds, cfg, np.random.default_rng(1))
            best, _ = train(net, ds, cfg, KernelParams(),
                            np.random.default_rng(2))
            vectors.append(contribution(best, ds.window_len).values)
        for i in range(len(vectors)):
            for j in range(i + 1, len(vectors)):
                assert np.abs(vectors[i] - vectors[j]).sum() > 0
