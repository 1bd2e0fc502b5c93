"""
Domain data types for the shock calibration toolkit.

Signals are immutable float64 arrays tagged with their sample rate.
"""
from dataclasses import dataclass, field

import numpy as np

from exceptions import DegenerateSignal, InvalidConfig, InvalidRange, MismatchedSets

DEFAULT_SAMPLE_RATE = 200_000.0


def _frozen_array(values):
    """Copy values into a read-only float64 array."""
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ShockSignal:
    """Acceleration time series in g sampled at sample_rate Hz."""
    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = _frozen_array(self.samples)
        if samples.ndim != 1:
            raise DegenerateSignal(f'signal must be one-dimensional, got shape {samples.shape}')
        if not np.all(np.isfinite(samples)):
            raise DegenerateSignal('signal contains NaN or Inf samples')
        if not self.sample_rate > 0:
            raise InvalidRange(f'sample rate must be positive, got {self.sample_rate}')
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', float(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, ShockSignal):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    __hash__ = None

    def __repr__(self):
        return f'<ShockSignal n={len(self)} fs={self.sample_rate:g}Hz peak={self.peak_abs():.1f}g>'

    def peak_abs(self):
        """Largest absolute sample value (0 for an empty signal)."""
        return float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0

    def scaled(self, alpha):
        """Return the signal multiplied by alpha."""
        return ShockSignal(self.samples * alpha, self.sample_rate)

    def reversed(self):
        """Return the time-reversed signal."""
        return ShockSignal(self.samples[::-1], self.sample_rate)


@dataclass(frozen=True, eq=False)
class NormalizedSignal:
    """Scale-free signal shape plus the peak magnitude it was divided by."""
    shape: np.ndarray
    peak: float
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, 'shape', _frozen_array(self.shape))
        object.__setattr__(self, 'peak', float(self.peak))

    def __len__(self):
        return len(self.shape)


@dataclass(frozen=True)
class SignalPair:
    """Co-registered low-end and high-end recordings of one drop."""
    low: ShockSignal
    high: ShockSignal
    drop_id: int = 0

    def __post_init__(self):
        if len(self.low) != len(self.high):
            raise MismatchedSets(f'pair {self.drop_id}: low has {len(self.low)} samples, '
                                 f'high has {len(self.high)}')
        if self.low.sample_rate != self.high.sample_rate:
            raise MismatchedSets(f'pair {self.drop_id}: sample rates differ')


@dataclass(frozen=True)
class EvalReport:
    """Peak and shape errors of one calibration method on one dataset split."""
    method: str
    eps_p: float
    eps_s: float
    per_signal_peak_err: tuple
    per_signal_shape_err: tuple
    n: int
    # Wall time of the method's predictions; not part of equality
    seconds: float = field(default=float('nan'), compare=False)

    @classmethod
    def from_errors(cls, method, peak_errors, shape_errors):
        """Build a report whose aggregates are the means of the per-signal errors."""
        peak_errors = tuple(float(e) for e in peak_errors)
        shape_errors = tuple(float(e) for e in shape_errors)
        if len(peak_errors) != len(shape_errors) or not peak_errors:
            raise MismatchedSets('per-signal error lists must be non-empty and of equal length')
        return cls(
            method=method,
            eps_p=float(np.mean(peak_errors)),
            eps_s=float(np.mean(shape_errors)),
            per_signal_peak_err=peak_errors,
            per_signal_shape_err=shape_errors,
            n=len(peak_errors),
        )

    def to_dict(self, timing=False):
        """Convert report to a table row (wall time only when timing is set)."""
        row = {
            'method': self.method,
            'eps_p_percent': 100.0 * self.eps_p,
            'eps_s': self.eps_s,
            'n': self.n,
        }
        if timing:
            row['seconds'] = self.seconds
        return row


@dataclass(frozen=True, eq=False)
class SrsCurve:
    """Maximax shock response spectrum."""
    freqs: np.ndarray
    values: np.ndarray
    q_factor: float = 10.0

    def __post_init__(self):
        freqs = _frozen_array(self.freqs)
        values = _frozen_array(self.values)
        if freqs.shape != values.shape or freqs.ndim != 1:
            raise InvalidRange('SRS frequencies and values must be 1-D and of equal length')
        if len(freqs) > 1 and not np.all(np.diff(freqs) > 0):
            raise InvalidRange('SRS frequencies must be strictly increasing')
        if np.any(values < 0):
            raise InvalidRange('SRS values must be non-negative')
        object.__setattr__(self, 'freqs', freqs)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.freqs)


@dataclass(frozen=True)
class RigConfig:
    """Size, peak range and seed of a synthetic drop-test campaign."""
    n_pairs: int = 660
    train_count: int = 500
    peak_range: tuple = (500.0, 8000.0)
    sample_rate: float = DEFAULT_SAMPLE_RATE
    master_seed: int = 20190604

    def validate(self):
        """Raise InvalidConfig unless the campaign is well-formed."""
        g_min, g_max = self.peak_range
        if self.n_pairs < 2:
            raise InvalidConfig(f'need at least 2 pairs, got {self.n_pairs}')
        if not 0 < self.train_count < self.n_pairs:
            raise InvalidConfig(f'train count {self.train_count} must be in (0, {self.n_pairs})')
        if not 0 < g_min <= g_max:
            raise InvalidConfig(f'invalid peak range {self.peak_range}')
        if not self.sample_rate > 0:
            raise InvalidConfig('sample rate must be positive')
        if not 0 <= self.master_seed < 2 ** 64:
            raise InvalidConfig('master seed must be a 64-bit unsigned integer')
        return self


@dataclass(frozen=True)
class LowEndModel:
    """
    Defects of a cheap accelerometer relative to the reference sensor.

    The per-drop gain is 1 + peak_gain_bias + gain_compression * log10(peak / 1000 g)
    + width_sensitivity * ln(duration / 0.5 ms) + peak_gain_spread * N(0, 1).
    noise_floor is the RMS of additive white noise as a fraction of the truth peak.
    """
    peak_gain_bias: float = -0.055
    peak_gain_spread: float = 0.05
    gain_compression: float = -0.15
    width_sensitivity: float = 0.30
    noise_floor: float = 0.02
    resonance_freq: float = 12_000.0
    resonance_q: float = 20.0
    resonance_gain: float = 0.3

    @classmethod
    def identity(cls):
        """A sensor that reproduces the truth exactly."""
        return cls(peak_gain_bias=0.0, peak_gain_spread=0.0, gain_compression=0.0,
                   width_sensitivity=0.0, noise_floor=0.0, resonance_gain=0.0)

    def validate(self, sample_rate=DEFAULT_SAMPLE_RATE):
        """Raise InvalidConfig unless the model is physical at this sample rate."""
        if not 0 < self.resonance_freq < sample_rate / 2:
            raise InvalidConfig(f'resonance {self.resonance_freq} Hz must lie below Nyquist')
        if self.peak_gain_spread < 0 or self.noise_floor < 0:
            raise InvalidConfig('spreads must be non-negative')
        if self.resonance_q <= 0.5:
            raise InvalidConfig('resonance Q must exceed 0.5')
        if not 0 <= self.resonance_gain <= 1:
            raise InvalidConfig('resonance gain must lie in [0, 1]')
        return self

