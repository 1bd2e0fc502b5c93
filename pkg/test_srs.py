"""Tests for the shock response spectrum backends."""
import numpy as np
import pytest

from exceptions import FrequencyAboveNyquist, InvalidRange
from models import RigConfig, ShockSignal, SrsCurve
from srs import log_freq_grid, srs_maximax, srs_oracle
from synth_rig import generate_dataset

GRID = log_freq_grid(100.0, 10_000.0, 6)


@pytest.fixture
def half_sine_like(pulse):
    """100 g, 11 ms haversine inside a 15 ms record."""
    return ShockSignal(pulse(100.0, 11e-3, center=1200))


def test_grid_examples():
    np.testing.assert_allclose(log_freq_grid(100.0, 400.0, 1), [100.0, 200.0, 400.0])
    np.testing.assert_allclose(log_freq_grid(100.0, 100.0, 6), [100.0])
    assert len(GRID) == 41
    np.testing.assert_allclose(GRID[1:] / GRID[:-1], 2 ** (1 / 6))
    assert GRID[0] == 100.0


@pytest.mark.parametrize('args', [(0.0, 100.0, 6), (200.0, 100.0, 6), (100.0, 1000.0, 0)])
def test_grid_rejects_bad_ranges(args):
    with pytest.raises(InvalidRange):
        log_freq_grid(*args)


def test_zero_signal_gives_zero_spectrum():
    zero = ShockSignal(np.zeros(3000))
    assert np.all(srs_maximax(zero, GRID).values == 0.0)
    assert np.all(srs_oracle(zero, GRID[::8]).values == 0.0)


def test_high_frequency_asymptote(half_sine_like):
    curve = srs_maximax(half_sine_like, [10_000.0])
    assert curve.values[0] == pytest.approx(100.0, rel=0.03)


def test_filter_matches_oracle_on_haversine(half_sine_like):
    fast = srs_maximax(half_sine_like, GRID)
    slow = srs_oracle(half_sine_like, GRID)
    np.testing.assert_allclose(fast.values, slow.values, rtol=0.01)


def test_filter_matches_oracle_on_synthetic_drops(small_campaign):
    for pair in small_campaign[1][:2]:
        for shock in (pair.low, pair.high):
            np.testing.assert_allclose(srs_maximax(shock, GRID).values, srs_oracle(shock, GRID).values, rtol=0.01)


@pytest.mark.slow
def test_filter_matches_oracle_on_ten_drops():
    train, _ = generate_dataset(RigConfig(n_pairs=12, train_count=10, master_seed=99))
    for pair in train:
        np.testing.assert_allclose(srs_maximax(pair.low, GRID).values, srs_oracle(pair.low, GRID).values, rtol=0.01)


def test_spectrum_is_linear(half_sine_like):
    base = srs_maximax(half_sine_like, GRID).values
    np.testing.assert_allclose(srs_maximax(half_sine_like.scaled(2.5), GRID).values, 2.5 * base, rtol=1e-12)


def test_higher_q_amplifies_resonance():
    t = np.arange(3000) / 200_000.0
    ringing = ShockSignal(np.sin(2 * np.pi * 1000.0 * t))
    low_q = srs_oracle(ringing, [1000.0], q_factor=10.0).values[0]
    high_q = srs_oracle(ringing, [1000.0], q_factor=50.0).values[0]
    assert high_q >= low_q
    assert srs_maximax(ringing, [1000.0], q_factor=50.0).values[0] >= srs_maximax(ringing, [1000.0]).values[0]


def test_rejects_frequency_at_nyquist(half_sine_like):
    with pytest.raises(FrequencyAboveNyquist):
        srs_maximax(half_sine_like, [1000.0, 100_000.0])
    with pytest.raises(FrequencyAboveNyquist):
        srs_oracle(half_sine_like, [100_000.0])


def test_rejects_low_q(half_sine_like):
    with pytest.raises(InvalidRange):
        srs_maximax(half_sine_like, GRID, q_factor=0.5)


def test_curve_invariants():
    with pytest.raises(InvalidRange):
        SrsCurve([200.0, 100.0], [1.0, 1.0])
    with pytest.raises(InvalidRange):
        SrsCurve([100.0, 200.0], [1.0, -1.0])
    curve = srs_maximax(ShockSignal(np.ones(10)), GRID[:3])
    assert len(curve) == 3 and curve.q_factor == 10.0
