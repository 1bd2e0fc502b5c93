"""Tests for the low-pass, linear-regression and autoencoder baselines."""
import numpy as np
import pytest

from baselines import ae_baseline, apply_zero_phase, design_lowpass, fit_linear
from calibnet import Architecture, TrainConfig
from exceptions import EmptyDataset, FilterTooLong, InvalidCutoff, SingularSystem
from models import RigConfig, ShockSignal, SignalPair
from signals import metric_eps_p, metric_eps_s
from synth_rig import generate_dataset

FS = 200_000.0


@pytest.fixture(scope='module')
def lowpass():
    return design_lowpass()


def tone(freq, n=3000):
    return ShockSignal(np.sin(2 * np.pi * freq * np.arange(n) / FS))


# ===== LOW-PASS FILTER =====

def test_filter_taps_are_symmetric_with_unit_dc_gain(lowpass):
    assert len(lowpass) % 2 == 1
    np.testing.assert_array_equal(lowpass.taps, lowpass.taps[::-1])
    assert lowpass.taps.sum() == pytest.approx(1.0, abs=1e-9)
    assert lowpass.cutoff == 5000.0


def test_constant_signal_passes_unchanged(lowpass):
    out = apply_zero_phase(lowpass, ShockSignal(np.full(3000, 7.0)))
    np.testing.assert_allclose(out.samples, 7.0, atol=1e-9)


def test_passband_at_1khz(lowpass):
    out = apply_zero_phase(lowpass, tone(1000.0)).samples[1000:2000]
    gain_db = 20 * np.log10(np.max(np.abs(out)))
    assert abs(gain_db) <= 0.5


def test_stopband_at_20khz(lowpass):
    out = apply_zero_phase(lowpass, tone(20_000.0)).samples[1000:2000]
    assert 20 * np.log10(np.max(np.abs(out))) <= -40.0


def test_zero_signal_stays_zero(lowpass):
    assert apply_zero_phase(lowpass, ShockSignal(np.zeros(1000))) == ShockSignal(np.zeros(1000))


def test_impulse_response_is_centred(lowpass):
    impulse = np.zeros(1001)
    impulse[500] = 1.0
    out = apply_zero_phase(lowpass, ShockSignal(impulse)).samples
    np.testing.assert_allclose(out[500:], out[500::-1], atol=1e-12)
    assert np.argmax(out) == 500


def test_filter_commutes_with_time_reversal(lowpass, small_campaign):
    low = small_campaign[0][0].low
    forward_then_reverse = apply_zero_phase(lowpass, low).reversed().samples
    reverse_then_forward = apply_zero_phase(lowpass, low.reversed()).samples
    np.testing.assert_allclose(forward_then_reverse, reverse_then_forward, atol=1e-9 * low.peak_abs())


def test_filter_longer_than_signal_is_rejected(lowpass):
    with pytest.raises(FilterTooLong):
        apply_zero_phase(lowpass, ShockSignal(np.ones(100)))


@pytest.mark.parametrize('cutoff', [0.0, -5.0, 100_000.0, 150_000.0])
def test_cutoff_must_be_below_nyquist(cutoff):
    with pytest.raises(InvalidCutoff):
        design_lowpass(cutoff)


def test_lowpass_raises_peak_error_on_campaign(lowpass):
    # Hard drops: short pulses that the 5 kHz filter visibly flattens
    _, test = generate_dataset(RigConfig(n_pairs=12, train_count=4, peak_range=(4000.0, 8000.0), master_seed=7),
                               threads=1)
    lows = [p.low for p in test]
    highs = [p.high for p in test]
    filtered = [apply_zero_phase(lowpass, s) for s in lows]
    assert metric_eps_s(filtered, highs) < metric_eps_s(lows, highs)
    assert metric_eps_p(filtered, highs) > metric_eps_p(lows, highs)


# ===== LINEAR REGRESSION =====

def test_linear_map_reproduces_identity_training_set(make_pairs):
    pairs = [SignalPair(p.high, p.high, p.drop_id) for p in make_pairs(8, 40, seed=3)]
    linear = fit_linear(pairs, ridge_lambda=1e-9)
    for pair in pairs:
        np.testing.assert_allclose(linear.calibrate(pair.low).samples, pair.high.samples,
                                   atol=1e-6 * pair.high.peak_abs())


def test_linear_map_is_deterministic(make_pairs):
    pairs = make_pairs(6, 40)
    a, b = fit_linear(pairs), fit_linear(pairs)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert a.peak_slope == b.peak_slope and a.fitted


def test_linear_map_primal_and_dual_agree(make_pairs):
    wide = fit_linear(make_pairs(6, 40), ridge_lambda=0.5)     # dual form
    tall_pairs = make_pairs(60, 20, seed=1)
    tall = fit_linear(tall_pairs, ridge_lambda=0.5)             # primal form
    assert wide.matrix.shape == (40, 40) and tall.matrix.shape == (20, 20)
    X = np.stack([s.samples / s.peak_abs() for s in (p.low for p in tall_pairs)])
    Y = np.stack([s.samples / s.peak_abs() for s in (p.high for p in tall_pairs)])
    Xc, Yc = X - X.mean(axis=0), Y - Y.mean(axis=0)
    dual = Xc.T @ np.linalg.solve(Xc @ Xc.T + 0.5 * np.eye(len(Xc)), Yc)
    np.testing.assert_allclose(tall.matrix, dual, atol=1e-8)


def test_linear_map_rank_deficient_without_ridge(make_pairs):
    with pytest.raises(SingularSystem):
        fit_linear(make_pairs(8, 40), ridge_lambda=0.0)


def test_linear_map_needs_two_pairs(make_pairs):
    with pytest.raises(EmptyDataset):
        fit_linear(make_pairs(1, 40))


# ===== AUTOENCODER =====

def test_ae_baseline_has_no_peak_network(make_pairs):
    result = ae_baseline(make_pairs(4, 64), TrainConfig(epochs=1, batch_size=4), Architecture.reduced(64, 8, 4))
    assert result.model.phi.size == 0
    assert not result.model.arch.with_ppn
    assert len(result.trace) == 1
