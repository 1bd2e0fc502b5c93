"""Tests for the synthetic drop-test rig."""
from dataclasses import replace

import numpy as np
import pytest

from exceptions import InvalidConfig, InvalidPulseParams
from models import LowEndModel, RigConfig, ShockSignal
from signals import detect_peak, metric_eps_p, metric_eps_s
from synth_rig import degrade, draw_pulse, generate_dataset, pulse_duration, simulate_drop, split_indices


def rng(seed=11):
    return np.random.default_rng(seed)


def test_simulate_drop_is_deterministic():
    a = simulate_drop(2500.0, 1e-3, rng())
    b = simulate_drop(2500.0, 1e-3, rng())
    assert a == b


def test_simulate_drop_peak_and_window():
    shock = simulate_drop(5000.0, 0.8e-3, rng())
    assert len(shock) == 3000
    assert shock.sample_rate == 200_000.0
    assert 4900.0 <= shock.peak_abs() <= 5100.0
    assert detect_peak(shock)[0] == 500


@pytest.mark.parametrize('peak, width', [(0.0, 1e-3), (-10.0, 1e-3), (1000.0, 0.1e-3), (1000.0, 4e-3)])
def test_simulate_drop_rejects_bad_pulses(peak, width):
    with pytest.raises(InvalidPulseParams):
        simulate_drop(peak, width, rng())


def test_pulse_duration_of_haversine(pulse):
    assert pulse_duration(ShockSignal(pulse(1000.0, 1e-3))) == pytest.approx(1e-3, abs=2e-5)


def test_identity_degradation_returns_truth():
    truth = simulate_drop(3000.0, 1e-3, rng())
    assert degrade(truth, LowEndModel.identity(), rng(5)) == truth


def test_degrade_is_deterministic_and_lossy():
    truth = simulate_drop(3000.0, 1e-3, rng())
    a = degrade(truth, LowEndModel(), rng(5))
    b = degrade(truth, LowEndModel(), rng(5))
    assert a == b
    assert a != truth
    assert np.all(np.isfinite(a.samples))


def test_low_end_model_validation():
    with pytest.raises(InvalidConfig):
        LowEndModel(resonance_freq=120_000.0).validate()
    with pytest.raises(InvalidConfig):
        LowEndModel(peak_gain_spread=-0.1).validate()


def test_draw_pulse_within_ranges():
    generator = rng()
    for _ in range(200):
        peak, width = draw_pulse((500.0, 8000.0), generator)
        assert 500.0 <= peak <= 8000.0
        assert 0.3e-3 <= width <= 3e-3


def test_rig_config_validation():
    with pytest.raises(InvalidConfig):
        RigConfig(n_pairs=10, train_count=12).validate()
    with pytest.raises(InvalidConfig):
        RigConfig(peak_range=(0.0, 100.0)).validate()
    RigConfig().validate()


def test_split_is_a_partition():
    cfg = RigConfig(n_pairs=30, train_count=20, master_seed=3)
    train_ids, test_ids = split_indices(cfg)
    assert len(train_ids) == 20 and len(test_ids) == 10
    assert sorted(train_ids + test_ids) == list(range(30))


def test_generate_dataset_small(small_campaign):
    train, test = small_campaign
    assert len(train) == 8 and len(test) == 4
    ids = [pair.drop_id for pair in train + test]
    assert sorted(ids) == list(range(12))
    for pair in train + test:
        assert len(pair.low) == len(pair.high) == 3000
        assert 500.0 <= pair.high.peak_abs() <= 8000.0
        assert detect_peak(pair.high)[0] == 500


def test_generate_dataset_independent_of_threads(small_campaign):
    cfg = RigConfig(n_pairs=12, train_count=8, master_seed=7)
    train, test = generate_dataset(cfg, threads=4)
    assert [p.low for p in train + test] == [p.low for p in small_campaign[0] + small_campaign[1]]
    assert [p.high for p in train + test] == [p.high for p in small_campaign[0] + small_campaign[1]]


def test_different_seed_gives_different_data(small_campaign):
    cfg = RigConfig(n_pairs=12, train_count=8, master_seed=8)
    train, _ = generate_dataset(cfg, threads=1)
    assert train[0].high != small_campaign[0][0].high


def test_identity_model_has_zero_error():
    cfg = RigConfig(n_pairs=6, train_count=4, master_seed=1)
    train, test = generate_dataset(cfg, LowEndModel.identity(), threads=2)
    pairs = train + test
    lows, highs = [p.low for p in pairs], [p.high for p in pairs]
    assert metric_eps_p(lows, highs) == 0.0
    assert metric_eps_s(lows, highs) == 0.0


def test_dataset_rejects_bad_split():
    with pytest.raises(InvalidConfig):
        generate_dataset(RigConfig(n_pairs=10, train_count=12))


def test_dataset_rejects_bad_sensor():
    with pytest.raises(InvalidConfig):
        generate_dataset(RigConfig(n_pairs=4, train_count=2), replace(LowEndModel(), resonance_q=0.4))


@pytest.mark.slow
def test_default_campaign_matches_generator_calibration():
    train, test = generate_dataset(RigConfig())
    assert len(train) == 500 and len(test) == 160
    eps_p = metric_eps_p([p.low for p in train], [p.high for p in train])
    assert 0.10 <= eps_p <= 0.17
