#!/usr/bin/env python

"""This module is the alpha discovery neural network (ADNN): a small
dense network that maps a standardized 30-day OHLCV window to a feature
value and is trained to maximize the cross-sectional rank correlation
of its outputs with forward returns.

Rank is not differentiable, so each day's outputs are passed through
the kernel

    g(x_i) = 1 / (1 + exp(-p * (x_i - mean(x)) / (2 * std(x) + eps)))

and the loss is minus the Pearson correlation of g(outputs) with the
exactly rank-normalized returns, averaged over the days of a batch.
The gradient flows through the batch mean and std of g. Networks can be
pre-trained by regression onto a teacher feature (a classical formula,
another feature or random values) before the correlation training, and
their first-layer weights give a per-input contribution vector.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> rng = np.random.default_rng(0)
    >>> net = MlpNetwork.initialize([150, 64, 32, 1], rng)
    >>> net = pretrain(net, teacher, ds, TrainConfig(), rng)
    >>> net, history = train(net, ds, TrainConfig(), KernelParams(), rng)

Output
-------
    ``save_network`` writes a binary checkpoint; ``write_contrib_trace``
    writes ``contrib_trace.csv`` (feature_id, epoch, input_index, field,
    lag, value).

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
from scipy.special import expit

from alpha_discovery.Alpha_Discovery_Errors import ConfigError, DataError, \
    TrainingError
from alpha_discovery.Alpha_Discovery_Evaluation import _spearman, rank01
from alpha_discovery.Alpha_Discovery_Market_Data import FIELDS, FeaturePanel, \
    sample_batch

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'ADNNCKPT'
CHECKPOINT_VERSION = 1
HIDDEN_SIZES = (64, 32)
CONTRIB_COLUMNS = ['feature_id', 'epoch', 'input_index', 'field', 'lag',
                   'value']


@dataclass(frozen=True)
class KernelParams:
    """Parameters of the soft-rank kernel g.

    Attributes
    ----------
    p: float
        Slope; 1.83 places about 95% of a normal cross-section inside
        g's near-linear range.
    epsilon_std: float
        Guard added to the std denominator.
    """

    p: float = 1.83
    epsilon_std: float = 1e-8

    def validate(self):
        if not self.p > 0:
            raise ConfigError('kernel.p', 'must be > 0')
        if not self.epsilon_std > 0:
            raise ConfigError('kernel.epsilon_std', 'must be > 0')


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer, batching, early-stopping and pre-training settings.

    Attributes
    ----------
    lr: float
        Adam step size.
    beta1, beta2: float
        Adam moment decays.
    batch_days: int
        Trading days per batch.
    batches_per_epoch: int
        Optimizer steps per epoch.
    max_epochs: int
        Epoch budget of the correlation training.
    patience: int
        Epochs without validation improvement before stopping.
    pretrain_epochs: int
        Epoch budget of pre-training onto a formula teacher.
    fidelity: float
        Pre-training stops once the mean daily train Spearman between
        network and teacher reaches this value.
    random_pretrain_epochs: int
        Pre-training epochs when the teacher is random (no fidelity
        target).
    hidden_sizes: tuple of ints
        Widths of the hidden layers.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    batch_days: int = 10
    batches_per_epoch: int = 25
    max_epochs: int = 200
    patience: int = 10
    pretrain_epochs: int = 200
    fidelity: float = 0.9
    random_pretrain_epochs: int = 20
    hidden_sizes: tuple = HIDDEN_SIZES

    def validate(self):
        if self.lr < 0:
            raise ConfigError('adnn.lr', 'must be >= 0')
        for name in ('beta1', 'beta2'):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError('adnn.' + name, 'must lie in [0, 1)')
        for name in ('batch_days', 'batches_per_epoch', 'max_epochs'):
            if getattr(self, name) < 1:
                raise ConfigError('adnn.' + name, 'must be >= 1')
        for name in ('pretrain_epochs', 'random_pretrain_epochs'):
            if getattr(self, name) < 0:
                raise ConfigError('adnn.' + name, 'must be >= 0')
        if not 0 <= self.patience < self.max_epochs:
            raise ConfigError('adnn.patience', 'must be >= 0 and < max_epochs')
        if not -1 <= self.fidelity <= 1:
            raise ConfigError('adnn.fidelity', 'must lie in [-1, 1]')
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ConfigError('adnn.hidden_sizes', 'needs positive widths')


class MlpNetwork:
    """A dense feedforward network with tanh hidden layers and a linear
    scalar output.

    Attributes
    ----------
    sizes: list of ints
        Layer widths, input first; the last is 1.
    weights: list of 2-D numpy arrays
        ``weights[l]`` has shape (sizes[l], sizes[l + 1]); the first
        layer's ``weights[0][j, k]`` connects input j to hidden unit k.
    biases: list of 1-D numpy arrays
        ``biases[l]`` has length sizes[l + 1].

    Methods
    -------
    initialize(sizes, rng)
        Glorot-uniform weights and zero biases.
    forward(x)
        Outputs for a (n, input_dim) input matrix.
    forward_cache(x)
        Outputs plus the activations backward needs.
    backward(cache, d_out)
        Parameter gradients given d loss / d output.
    copy()
        An independent copy.
    """

    def __init__(self, weights, biases):
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        self.sizes = [self.weights[0].shape[0]] + \
            [w.shape[1] for w in self.weights]
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[1],):
                raise TrainingError('bias of shape {} does not match weights '
                                    '{}'.format(b.shape, w.shape))
        for w, w_next in zip(self.weights, self.weights[1:]):
            if w.shape[1] != w_next.shape[0]:
                raise TrainingError('layer shapes {} and {} do not chain'
                                    .format(w.shape, w_next.shape))
        if self.sizes[-1] != 1:
            raise TrainingError('the output layer must have one unit')

    @classmethod
    def initialize(cls, sizes, rng):
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def input_dim(self):
        return self.sizes[0]

    def copy(self):
        return MlpNetwork(self.weights, self.biases)

    def forward_cache(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise TrainingError('input of shape {} does not match input '
                                'dimension {}'.format(x.shape, self.input_dim))
        activations = [x]
        a = x
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a.dot(w) + b
            a = z if layer == last else np.tanh(z)
            activations.append(a)
        return a[:, 0], activations

    def forward(self, x):
        return self.forward_cache(x)[0]

    def backward(self, activations, d_out):
        """Backpropagates ``d_out`` (one value per sample)."""
        delta = np.asarray(d_out, dtype=float)[:, None]
        weight_grads = [None] * len(self.weights)
        bias_grads = [None] * len(self.weights)
        for layer in range(len(self.weights) - 1, -1, -1):
            a_prev = activations[layer]
            weight_grads[layer] = a_prev.T.dot(delta)
            bias_grads[layer] = delta.sum(axis=0)
            if layer:
                delta = delta.dot(self.weights[layer].T) * (1.0 - a_prev ** 2)
        return weight_grads, bias_grads


class AdamOptimizer:
    """Adaptive moment estimation over a network's parameters."""

    def __init__(self, net, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        params = net.weights + net.biases
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    @classmethod
    def from_config(cls, net, cfg):
        return cls(net, cfg.lr, cfg.beta1, cfg.beta2)

    def step(self, net, weight_grads, bias_grads):
        self.t += 1
        params = net.weights + net.biases
        grads = list(weight_grads) + list(bias_grads)
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for i, (param, grad) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad ** 2
            m_hat = self.m[i] / correction1
            v_hat = self.v[i] / correction2
            param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def g_kernel(x, params=KernelParams()):
    """The soft-rank kernel over one cross-section.

    Parameters
    ----------
    x: 1-D array-like
        Non-empty cross-section.
    params: KernelParams
        Slope and std guard.

    Returns
    -------
    g: 1-D numpy array
        Values in (0, 1), strictly increasing in x; exactly 0.5 at the
        mean.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise DataError('g_kernel needs a non-empty vector')
    centered = x - x.mean()
    return expit(params.p * centered / (2.0 * x.std() + params.epsilon_std))


def compression_threshold(p=1.83):
    """Smallest std / mean ratio at which g compresses a 2-std outlier
    at least as much as its relative distance from the mean."""
    return (2.0 * expit(p) - 1.0) / 2.0


def compression_holds(mean, std, p=1.83, epsilon_std=1e-8):
    """Whether |g(x) - g(mean)| / g(mean) <= |x - mean| / mean at
    x = mean + 2 * std, for a distribution with positive ``mean``."""
    if not mean > 0:
        raise DataError('compression needs a positive mean')
    spread = 2.0 * std
    g_x = expit(p * spread / (2.0 * std + epsilon_std))
    return abs(g_x - 0.5) / 0.5 <= spread / mean


SurrogateLoss = namedtuple('SurrogateLoss', ['loss', 'gradients',
                                             'degenerate'])
SurrogateLoss.__doc__ = """Value and output-gradient of the surrogate loss.

loss: float in [-1, 1].
gradients: list of 1-D numpy arrays, d loss / d outputs per day.
degenerate: list of bools, days scored 0 because g(outputs) or the
    returns were constant.
"""


def _day_correlation(x, returns, params):
    """Pearson(g(x), rank01(returns)) and its gradient w.r.t. x."""
    n = x.size
    centered = x - x.mean()
    std = math.sqrt(np.dot(centered, centered) / n)
    denom = 2.0 * std + params.epsilon_std
    g = expit(params.p * centered / denom)
    y = rank01(returns)

    gc = g - g.mean()
    yc = y - y.mean()
    sg = math.sqrt(np.dot(gc, gc))
    sy = math.sqrt(np.dot(yc, yc))
    if sg == 0 or sy == 0 or std == 0:
        return 0.0, np.zeros(n), True
    rho = np.dot(gc, yc) / (sg * sy)

    d_g = yc / (sg * sy) - rho * gc / sg ** 2
    b = d_g * params.p * g * (1.0 - g)
    grad = b / denom - b.sum() / (n * denom) - \
        2.0 * np.dot(b, centered) * centered / (denom ** 2 * n * std)
    return float(rho), grad, False


def surrogate_ic_loss(outputs, returns, params=KernelParams()):
    """Minus the mean daily Pearson correlation of g(outputs) with the
    rank-normalized returns.

    Parameters
    ----------
    outputs: list of 1-D array-likes
        Network outputs, one cross-section per day.
    returns: list of 1-D array-likes
        Forward returns of the same assets, per day.
    params: KernelParams
        Kernel settings.

    Returns
    -------
    result: SurrogateLoss
        Loss, exact gradient w.r.t. every output, degenerate-day flags.
    """
    if len(outputs) != len(returns) or not outputs:
        raise TrainingError('need matching, non-empty per-day outputs and '
                            'returns')
    n_days = len(outputs)
    total = 0.0
    gradients, degenerate = [], []
    for x, r in zip(outputs, returns):
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        if x.shape != r.shape or x.size < 2:
            raise TrainingError('day cross-sections differ in length or hold '
                                'fewer than 2 assets')
        rho, grad, flat = _day_correlation(x, r, params)
        total += rho
        gradients.append(-grad / n_days)
        degenerate.append(flat)
    return SurrogateLoss(-total / n_days, gradients, degenerate)


LossGradients = namedtuple('LossGradients', ['loss', 'weight_grads',
                                             'bias_grads', 'degenerate'])
LossGradients.__doc__ = """Surrogate loss of a batch with whole-network
parameter gradients (same layout as MlpNetwork.weights / biases)."""


def loss_and_gradients(net, batch, params=KernelParams()):
    """Forward pass, surrogate loss and backpropagation over one batch.

    Parameters
    ----------
    net: MlpNetwork
        The network.
    batch: CrossSectionBatch
        Days of samples with their forward returns.
    params: KernelParams
        Kernel settings.

    Returns
    -------
    result: LossGradients
    """
    passes = [net.forward_cache(x) for x in batch.inputs]
    surrogate = surrogate_ic_loss([out for out, _ in passes], batch.returns,
                                  params)
    weight_grads = [np.zeros_like(w) for w in net.weights]
    bias_grads = [np.zeros_like(b) for b in net.biases]
    for (_, cache), d_out in zip(passes, surrogate.gradients):
        day_w, day_b = net.backward(cache, d_out)
        for layer in range(len(weight_grads)):
            weight_grads[layer] += day_w[layer]
            bias_grads[layer] += day_b[layer]
    return LossGradients(surrogate.loss, weight_grads, bias_grads,
                         surrogate.degenerate)


def train_step(net, batch, optimizer, params=KernelParams()):
    """One backpropagation and optimizer update on one batch.

    Returns
    -------
    net: MlpNetwork
        The same network, updated in place.
    loss: float
        Loss before the update.

    Raises
    ------
    TrainingError
        If the loss or a gradient is not finite.
    """
    result = loss_and_gradients(net, batch, params)
    grads = result.weight_grads + result.bias_grads
    if not math.isfinite(result.loss) or \
            not all(np.all(np.isfinite(g)) for g in grads):
        raise TrainingError('non-finite loss {} on days {}'.format(
            result.loss, list(batch.day_indices)))
    optimizer.step(net, result.weight_grads, result.bias_grads)
    return net, result.loss


def _zscore(x):
    std = x.std()
    if std == 0:
        return np.zeros_like(x)
    return (x - x.mean()) / std


def _teacher_days(teacher, ds):
    """Per training day: (samples, z-scored teacher) over cells where
    both the window and the teacher are valid."""
    days = []
    for day in ds.splits['train']:
        mask = ds.valid[:, day] & teacher.valid[:, day]
        if mask.sum() < 2:
            continue
        days.append((ds.samples[mask, day],
                     _zscore(teacher.values[mask, day])))
    return days


def teacher_fidelity(net, teacher, ds):
    """Mean daily Spearman between network outputs and a teacher on the
    training split."""
    scores = [_spearman(net.forward(x), target)[0]
              for x, target in _teacher_days(teacher, ds)]
    return float(np.mean(scores)) if scores else 0.0


def pretrain(net, teacher, ds, cfg, rng, random_teacher=False):
    """Regresses the network onto a teacher feature.

    Minimizes the mean squared error between the network output and the
    per-day z-scored teacher over training samples, one pass over the
    shuffled training days per epoch in chunks of ``cfg.batch_days``.

    Parameters
    ----------
    net: MlpNetwork
        Network to pre-train in place.
    teacher: FeaturePanel
        Teacher values on the panel grid.
    ds: WindowDataset
        Samples and splits.
    cfg: TrainConfig
        Optimizer and budget settings.
    rng: numpy.random.Generator
        Shuffles the days.
    random_teacher: bool
        Random teachers train for ``cfg.random_pretrain_epochs`` without a
        fidelity target.

    Returns
    -------
    net: MlpNetwork
        The pre-trained network.
    """
    days = _teacher_days(teacher, ds)
    if not days:
        raise DataError('teacher {} is undefined on every training day'
                        .format(teacher.name))
    optimizer = AdamOptimizer.from_config(net, cfg)
    budget = cfg.random_pretrain_epochs if random_teacher \
        else cfg.pretrain_epochs
    fidelity = teacher_fidelity(net, teacher, ds)
    for epoch in range(1, budget + 1):
        if not random_teacher and fidelity >= cfg.fidelity:
            break
        order = rng.permutation(len(days))
        for start in range(0, len(order), cfg.batch_days):
            chunk = [days[i] for i in order[start:start + cfg.batch_days]]
            x = np.concatenate([c[0] for c in chunk])
            target = np.concatenate([c[1] for c in chunk])
            out, cache = net.forward_cache(x)
            error = out - target
            if not np.all(np.isfinite(error)):
                raise TrainingError('non-finite pre-training output in epoch '
                                    '{}'.format(epoch))
            weight_grads, bias_grads = net.backward(
                cache, 2.0 * error / error.size)
            optimizer.step(net, weight_grads, bias_grads)
        fidelity = teacher_fidelity(net, teacher, ds)
        logger.debug('Pretrain epoch %d on %s: fidelity %.4f', epoch,
                     teacher.name, fidelity)

    if not random_teacher and fidelity < cfg.fidelity:
        logger.warning('Pre-training onto %s reached fidelity %.4f after %d '
                       'epochs, below the %.2f target', teacher.name,
                       fidelity, budget, cfg.fidelity)
    else:
        logger.info('Pre-trained onto %s: fidelity %.4f', teacher.name,
                    fidelity)
    return net


ContributionVector = namedtuple('ContributionVector', ['values', 'by_field',
                                                       'by_lag'])
ContributionVector.__doc__ = """First-layer contribution of every input.

values: 1-D array, c_j = sum_k |w[j, k]| over input coordinates j.
by_field: 1-D array of 5 sums, ordered as FIELDS.
by_lag: 1-D array of window_len sums; index 0 is the window's last day.
"""


def contribution(net, window_len=None):
    """Per-input contributions and their field and lag aggregates."""
    values = np.abs(net.weights[0]).sum(axis=1)
    window_len = window_len or values.size // len(FIELDS)
    if window_len * len(FIELDS) != values.size:
        raise TrainingError('input dimension {} is not {} fields x {} days'
                            .format(values.size, len(FIELDS), window_len))
    grid = values.reshape(len(FIELDS), window_len)
    return ContributionVector(values, grid.sum(axis=1),
                              grid.sum(axis=0)[::-1])


EpochRecord = namedtuple('EpochRecord', ['epoch', 'train_loss', 'val_ic',
                                         'contribution'])
EpochRecord.__doc__ = """One epoch of correlation training."""


def split_ic_of(net, ds, split):
    """Mean exact daily Spearman IC of the network on a split's eligible
    days."""
    scores = []
    for day in ds.eligible_days(split):
        mask = ds.pair_mask(day)
        scores.append(_spearman(net.forward(ds.samples[mask, day]),
                                ds.returns.values[mask, day])[0])
    return float(np.mean(scores)) if scores else 0.0


def train(net, ds, cfg, params, rng):
    """Correlation training with validation-IC early stopping.

    Parameters
    ----------
    net: MlpNetwork
        Pre-trained or fresh network; trained in place.
    ds: WindowDataset
        Samples, forward returns and splits.
    cfg: TrainConfig
        Optimizer, batching and stopping settings.
    params: KernelParams
        Kernel settings.
    rng: numpy.random.Generator
        Draws the batch days.

    Returns
    -------
    best: MlpNetwork
        A copy of the weights with the highest validation IC.
    history: list of EpochRecord
        One record per epoch run.
    """
    optimizer = AdamOptimizer.from_config(net, cfg)
    history = []
    best, best_ic, best_epoch = net.copy(), -np.inf, 0
    for epoch in range(1, cfg.max_epochs + 1):
        losses = []
        for _ in range(cfg.batches_per_epoch):
            batch = sample_batch(ds, 'train', cfg.batch_days, rng)
            net, loss = train_step(net, batch, optimizer, params)
            losses.append(loss)
        val_ic = split_ic_of(net, ds, 'val')
        history.append(EpochRecord(epoch, float(np.mean(losses)), val_ic,
                                   contribution(net, ds.window_len)))
        logger.info('Epoch %d: train loss %.4f, val IC %.4f', epoch,
                    history[-1].train_loss, val_ic)
        if val_ic > best_ic:
            best, best_ic, best_epoch = net.copy(), val_ic, epoch
        if epoch - best_epoch >= cfg.patience:
            logger.info('Early stop after epoch %d; best val IC %.4f at '
                        'epoch %d', epoch, best_ic, best_epoch)
            break
    return best, history


def network_feature(net, ds, name):
    """The FeaturePanel a network produces on every valid sample."""
    values = np.zeros(ds.valid.shape)
    values[ds.valid] = net.forward(ds.samples[ds.valid])
    return FeaturePanel(name, values, ds.valid)


def random_teacher(ds, rng, mode='normal', hidden_sizes=HIDDEN_SIZES):
    """A random teacher feature.

    Parameters
    ----------
    ds: WindowDataset
        Defines the grid and valid cells.
    rng: numpy.random.Generator
        Seeded generator.
    mode: string
        'normal' for i.i.d. standard-normal values per sample, 'network'
        for the outputs of a freshly initialized network.
    """
    if mode == 'normal':
        values = rng.standard_normal(ds.valid.shape)
        return FeaturePanel('random_normal', values, ds.valid)
    if mode == 'network':
        sizes = [ds.input_dim] + list(hidden_sizes) + [1]
        return network_feature(MlpNetwork.initialize(sizes, rng), ds,
                               'random_network')
    raise ConfigError('scheme.random_teacher',
                      'unknown mode {!r}'.format(mode))


def save_network(net, path):
    """Writes a checkpoint: magic, uint32 version, layer count and sizes,
    then per layer the float64 weights (row-major, input x output) and
    biases, all little-endian."""
    header = np.array([CHECKPOINT_VERSION, len(net.sizes)] + net.sizes,
                      dtype='<u4')
    with open(path, 'wb') as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(header.tobytes())
        for w, b in zip(net.weights, net.biases):
            f.write(np.ascontiguousarray(w, dtype='<f8').tobytes())
            f.write(np.ascontiguousarray(b, dtype='<f8').tobytes())


def load_network(path):
    """Reads a checkpoint written by ``save_network``.

    Raises
    ------
    DataError
        On a wrong magic, an unknown version or a truncated file.
    """
    with open(path, 'rb') as f:
        blob = f.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise DataError('{} is not a network checkpoint'.format(path))
    offset = len(CHECKPOINT_MAGIC)

    def read(dtype, count):
        nonlocal offset
        size = np.dtype(dtype).itemsize * count
        if offset + size > len(blob):
            raise DataError('{} is truncated'.format(path))
        out = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
        offset += size
        return out

    version, n_layers = read('<u4', 2)
    if version != CHECKPOINT_VERSION:
        raise DataError('{} has checkpoint version {}, expected {}'.format(
            path, version, CHECKPOINT_VERSION))
    sizes = [int(s) for s in read('<u4', int(n_layers))]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(read('<f8', fan_in * fan_out).reshape(fan_in, fan_out))
        biases.append(read('<f8', fan_out))
    if offset != len(blob):
        raise DataError('{} has {} trailing bytes'.format(
            path, len(blob) - offset))
    return MlpNetwork(weights, biases)


def contrib_trace_frame(history, feature_id):
    """Every epoch's contribution vector of one network, one row per
    input."""
    rows = []
    for record in history:
        values = record.contribution.values
        window_len = values.size // len(FIELDS)
        for j, value in enumerate(values):
            field, pos = divmod(j, window_len)
            rows.append((record.epoch, j, FIELDS[field],
                         window_len - 1 - pos, float(value)))
    frame = pd.DataFrame(rows, columns=CONTRIB_COLUMNS[1:])
    frame.insert(0, 'feature_id', feature_id)
    return frame


def write_contrib_trace(traces, path):
    """Writes the contribution traces of several networks.

    Parameters
    ----------
    traces: dict of string to list of EpochRecord
        Training history of each network, keyed by feature id.
    path: string
        Output CSV path.
    """
    frames = [contrib_trace_frame(history, feature_id)
              for feature_id, history in traces.items()]
    frame = pd.concat(frames, ignore_index=True) if frames else \
        pd.DataFrame(columns=CONTRIB_COLUMNS)
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info('Wrote %d contribution rows to %s', len(frame), path)
