"""
Shared pytest fixtures.

Tests marked ``slow`` (full-size campaign, end-to-end training, ablations)
run only with SHOCKCAL_SLOW=1.
"""
import os

import numpy as np
import pytest

from models import RigConfig, ShockSignal, SignalPair
from synth_rig import generate_dataset

SAMPLE_RATE = 200_000.0


def haversine(peak, width, length=3000, center=500, sample_rate=SAMPLE_RATE):
    """cos^2 pulse of the given peak (g) and duration (s) centred on a sample."""
    t = (np.arange(length) - center) / sample_rate
    return np.where(np.abs(t) <= width / 2, peak * np.cos(np.pi * t / width) ** 2, 0.0)


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: full-size runs, enabled with SHOCKCAL_SLOW=1')


def pytest_collection_modifyitems(config, items):
    if os.environ.get('SHOCKCAL_SLOW') == '1':
        return
    skip_slow = pytest.mark.skip(reason='set SHOCKCAL_SLOW=1 to run')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def pulse():
    return haversine


@pytest.fixture
def make_pairs():
    """Factory of small seeded low/high pairs of arbitrary length."""
    def factory(n=4, length=64, seed=0):
        rng = np.random.default_rng(seed)
        pairs = []
        for drop_id in range(n):
            peak = rng.uniform(500.0, 5000.0)
            width = rng.uniform(10, 30) / SAMPLE_RATE
            high = haversine(peak, width, length, center=length // 4)
            low = high * rng.uniform(0.8, 1.2) + rng.normal(0.0, 0.02 * peak, length)
            pairs.append(SignalPair(ShockSignal(low), ShockSignal(high), drop_id))
        return pairs
    return factory


@pytest.fixture(scope='session')
def small_campaign():
    """(train, test) of a 12-pair seeded campaign with the default sensor."""
    return generate_dataset(RigConfig(n_pairs=12, train_count=8, master_seed=7), threads=1)
