"""Shared fixtures: a small planted-signal panel and its window dataset.

The layout (5-day windows, 40/10/10 splits, 2-day horizon, 30 assets)
keeps every test fast while exercising the same code paths as the
default 30-day layout.
"""

import numpy as np
import pandas as pd
import pytest

from alpha_discovery.Alpha_Discovery_Market_Data import OhlcvPanel, \
    build_windows
from alpha_discovery.Alpha_Discovery_Synthetic import SynthConfig, \
    generate_synthetic_panel

WINDOW = 5
SPLITS = (40, 10, 10)
HORIZON = 2
MIN_CROSS = 10
N_ASSETS = 30
N_DAYS = WINDOW + sum(SPLITS) + HORIZON

SMALL_INI = """\
[data]
window_len = 5
horizon = 2
train_days = 40
val_days = 10
test_days = 10
min_cross_section = 10

[synth]
n_assets = 30
n_days = 67
signal_beta = 0.05
noise_sigma = 0.01

[gp]
population_size = 20
generations = 1
max_depth = 3
elitism = 2

[adnn]
batch_days = 5
batches_per_epoch = 2
max_epochs = 2
patience = 1
pretrain_epochs = 2
random_pretrain_epochs = 1
hidden_sizes = 8, 4

[scheme]
n_features = 4
"""


def small_synth(seed=1, signal_beta=0.05, noise_sigma=0.01):
    cfg = SynthConfig(n_assets=N_ASSETS, n_days=N_DAYS, seed=seed,
                      signal_beta=signal_beta, noise_sigma=noise_sigma)
    return generate_synthetic_panel(cfg, WINDOW, SPLITS, HORIZON, MIN_CROSS)


@pytest.fixture(scope='session')
def synth():
    return small_synth()


@pytest.fixture(scope='session')
def panel(synth):
    return synth.panel


@pytest.fixture(scope='session')
def ds(panel):
    return build_windows(panel, WINDOW, SPLITS, HORIZON, MIN_CROSS)


@pytest.fixture
def small_ini(tmp_path):
    path = tmp_path / 'small.ini'
    path.write_text(SMALL_INI)
    return str(path)


def make_panel(n_assets=4, n_days=12, seed=0, tradable=None):
    """A hand-sized random-walk panel with valid bars."""
    rng = np.random.default_rng(seed)
    close = 50.0 * np.exp(np.cumsum(0.01 * rng.standard_normal(
        (n_assets, n_days)), axis=1))
    open_ = close * (1.0 + 0.001 * rng.standard_normal((n_assets, n_days)))
    high = np.maximum(open_, close) * 1.01
    low = np.minimum(open_, close) * 0.99
    volume = rng.integers(1000, 5000, (n_assets, n_days)).astype(float)
    values = np.stack([open_, high, low, close, volume], axis=-1)
    if tradable is None:
        tradable = np.ones((n_assets, n_days), dtype=bool)
    assets = tuple('S{:02d}'.format(i) for i in range(n_assets))
    days = tuple(pd.bdate_range('2020-01-01', periods=n_days)
                 .strftime('%Y-%m-%d'))
    return OhlcvPanel(assets, days, values, tradable)
