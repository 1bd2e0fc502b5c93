"""
Synthetic drop-test rig.

Generates reference ("high-end") shock records and degrades them into
"low-end" sensor measurements. Each drop draws from its own random stream
derived from (master_seed, drop_id), so a dataset is identical no matter
how many worker threads build it.
"""
import logging
import math

import numpy as np

from exceptions import DegenerateSignal, InvalidPulseParams
from models import LowEndModel, ShockSignal, SignalPair
from signals import detect_peak, window_around_peak, window_sizes
from srs import sdof_response
from utils import parallel_map

logger = logging.getLogger(__name__)

MIN_PULSE_WIDTH = 0.3e-3   # s
MAX_PULSE_WIDTH = 3.0e-3   # s

# Table ringing after impact
RING_FREQ_RANGE = (800.0, 3000.0)      # Hz
RING_AMPLITUDE_RANGE = (0.03, 0.12)    # fraction of peak, <= 0.15
RING_DECAY_RANGE = (1.5e-3, 5e-3)      # s

# Pulse duration model: harder drops give shorter pulses
WIDTH_AT_1000G = 0.6e-3
WIDTH_PEAK_EXPONENT = -0.35
WIDTH_JITTER = 0.25

# Reference points of the low-end gain model
GAIN_REF_PEAK = 1000.0
GAIN_REF_DURATION = 0.5e-3

# Stream ids mixed into the master seed
SPLIT_STREAM = 2 ** 32


def simulate_drop(target_peak, pulse_width, rng, sample_rate=200_000.0):
    """
    Simulate one reference shock record.

    A haversine pulse of amplitude target_peak and duration pulse_width is
    followed by exponentially decaying table ringing, then windowed so the
    peak sits at the standard pre-peak offset.

    Args:
        target_peak: Pulse amplitude in g
        pulse_width: Pulse duration in seconds
        rng: numpy Generator for this drop

    Returns:
        ShockSignal of window length
    """
    if not (np.isfinite(target_peak) and target_peak > 0):
        raise InvalidPulseParams(f'target peak must be positive, got {target_peak}')
    if not MIN_PULSE_WIDTH <= pulse_width <= MAX_PULSE_WIDTH:
        raise InvalidPulseParams(f'pulse width {pulse_width * 1e3:.3f} ms outside [0.3, 3] ms')

    pre, length = window_sizes(sample_rate)
    # Raw record starts at a random trigger offset
    center = pre + 200 + int(rng.integers(0, 400))
    n = center + length + 200
    t = (np.arange(n) - center) / sample_rate

    half = pulse_width / 2
    record = np.where(np.abs(t) <= half, target_peak * np.cos(np.pi * t / pulse_width) ** 2, 0.0)

    ring_freq = rng.uniform(*RING_FREQ_RANGE)
    ring_amp = rng.uniform(*RING_AMPLITUDE_RANGE) * target_peak
    ring_decay = rng.uniform(*RING_DECAY_RANGE)
    after = t - half
    tail = after > 0
    record[tail] += ring_amp * np.exp(-after[tail] / ring_decay) * np.sin(2 * np.pi * ring_freq * after[tail])

    return window_around_peak(ShockSignal(record, sample_rate))


def pulse_duration(truth):
    """Estimate pulse duration as twice the full width at half maximum."""
    peak_index, value = detect_peak(truth)
    above = np.abs(truth.samples) >= 0.5 * abs(value)
    lo = peak_index
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = peak_index
    while hi < len(above) - 1 and above[hi + 1]:
        hi += 1
    return 2 * (hi - lo + 1) / truth.sample_rate


def degrade(truth, model, rng):
    """
    Turn a reference record into a low-end sensor measurement.

    The truth is blended with its response through a lightly damped sensor
    resonance, multiplied by a per-drop gain error and polluted with white
    noise proportional to the truth peak.
    """
    peak = truth.peak_abs()
    if peak == 0:
        raise DegenerateSignal('cannot degrade an all-zero signal')

    x = truth.samples
    if model.resonance_gain > 0:
        ringing = sdof_response(x, truth.sample_rate, model.resonance_freq, model.resonance_q)
        x = (1 - model.resonance_gain) * x + model.resonance_gain * ringing

    gain = (1.0 + model.peak_gain_bias
            + model.gain_compression * math.log10(peak / GAIN_REF_PEAK)
            + model.width_sensitivity * math.log(pulse_duration(truth) / GAIN_REF_DURATION)
            + model.peak_gain_spread * rng.standard_normal())
    noise = model.noise_floor * peak * rng.standard_normal(len(x))

    return ShockSignal(gain * x + noise, truth.sample_rate)


def draw_pulse(peak_range, rng):
    """Draw (peak, duration) for one drop: log-uniform peak, peak-dependent width."""
    g_min, g_max = peak_range
    peak = math.exp(rng.uniform(math.log(g_min), math.log(g_max)))
    width = WIDTH_AT_1000G * (peak / 1000.0) ** WIDTH_PEAK_EXPONENT * math.exp(WIDTH_JITTER * rng.standard_normal())
    return peak, float(np.clip(width, MIN_PULSE_WIDTH, MAX_PULSE_WIDTH))


def generate_pair(cfg, model, drop_id):
    """Generate one drop from its own seed-derived random stream."""
    truth_rng, sensor_rng = (np.random.default_rng(s)
                             for s in np.random.SeedSequence([cfg.master_seed, drop_id]).spawn(2))
    peak, width = draw_pulse(cfg.peak_range, truth_rng)
    high = simulate_drop(peak, width, truth_rng, cfg.sample_rate)
    low = degrade(high, model, sensor_rng)
    return SignalPair(low=low, high=high, drop_id=drop_id)


def split_indices(cfg):
    """Seeded shuffle of drop ids into (train ids, test ids), each sorted."""
    order = np.random.default_rng([cfg.master_seed, SPLIT_STREAM]).permutation(cfg.n_pairs)
    return sorted(order[:cfg.train_count].tolist()), sorted(order[cfg.train_count:].tolist())


def generate_dataset(cfg, model=None, threads=None):
    """
    Generate a full campaign and split it into train and test pairs.

    Args:
        cfg: RigConfig
        model: LowEndModel (defaults to the calibrated default sensor)
        threads: Worker cap; results do not depend on it

    Returns:
        Tuple of (train pairs, test pairs)
    """
    cfg.validate()
    model = (model or LowEndModel()).validate(cfg.sample_rate)

    logger.info('Generating %d drops (seed %d)', cfg.n_pairs, cfg.master_seed)
    pairs = parallel_map(lambda drop_id: generate_pair(cfg, model, drop_id), range(cfg.n_pairs), threads)

    train_ids, test_ids = split_indices(cfg)
    train = [pairs[i] for i in train_ids]
    test = [pairs[i] for i in test_ids]
    logger.info('Split into %d train / %d test pairs', len(train), len(test))
    return train, test
