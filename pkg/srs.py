"""
Shock response spectrum (SRS) of acceleration records.

The production backend runs each single-degree-of-freedom oscillator as the
ramp-invariant recursive filter of Smallwood (1981). The oracle backend
integrates the oscillator equation directly with RK4 and exists to verify it.
"""
import logging
import math

import numpy as np
from scipy import signal as sps

from exceptions import FrequencyAboveNyquist, InvalidRange
from models import SrsCurve

logger = logging.getLogger(__name__)

ORACLE_SUBSTEPS = 10


def log_freq_grid(f_min, f_max, points_per_octave):
    """
    Geometric frequency grid starting at f_min.

    Neighbours differ by 2**(1/points_per_octave); the last point is the first
    one at or above f_max, so the grid always covers the requested range.
    """
    if not 0 < f_min <= f_max:
        raise InvalidRange(f'need 0 < f_min <= f_max, got ({f_min}, {f_max})')
    if points_per_octave < 1:
        raise InvalidRange(f'points per octave must be >= 1, got {points_per_octave}')
    steps = math.ceil(points_per_octave * math.log2(f_max / f_min) - 1e-9)
    return f_min * 2.0 ** (np.arange(steps + 1) / points_per_octave)


def _check_grid(freqs, sample_rate, q_factor):
    freqs = np.asarray(freqs, dtype=np.float64)
    if q_factor <= 0.5:
        raise InvalidRange(f'Q must exceed 0.5, got {q_factor}')
    if np.any(freqs <= 0):
        raise InvalidRange('natural frequencies must be positive')
    nyquist = sample_rate / 2
    if np.any(freqs >= nyquist):
        raise FrequencyAboveNyquist(f'max frequency {freqs.max():g} Hz >= Nyquist {nyquist:g} Hz')
    return freqs


def smallwood_coefficients(natural_freq, sample_rate, damping):
    """Ramp-invariant filter (b, a) for base-excited absolute acceleration."""
    dt = 1.0 / sample_rate
    omega_n = 2 * np.pi * natural_freq
    omega_d = omega_n * np.sqrt(1 - damping ** 2)

    E = np.exp(-damping * omega_n * dt)
    C = E * np.cos(omega_d * dt)
    S = E * np.sin(omega_d * dt)
    S_d = S / omega_d / dt

    b = np.array([1 - S_d, 2 * (S_d - C), E ** 2 - S_d])
    a = np.array([1.0, -2 * C, E ** 2])
    return b, a


def sdof_response(samples, sample_rate, natural_freq, q_factor):
    """Absolute acceleration of a base-excited oscillator (g)."""
    b, a = smallwood_coefficients(natural_freq, sample_rate, 1.0 / (2.0 * q_factor))
    return sps.lfilter(b, a, samples)


def srs_maximax(shock, freqs, q_factor=10.0):
    """
    Maximax SRS through the recursive filter.

    Args:
        shock: ShockSignal excitation
        freqs: Natural frequencies in Hz, strictly increasing, below Nyquist
        q_factor: Oscillator Q (damping ratio 1 / 2Q)
    """
    freqs = _check_grid(freqs, shock.sample_rate, q_factor)
    values = np.array([
        np.max(np.abs(sdof_response(shock.samples, shock.sample_rate, fn, q_factor)), initial=0.0)
        for fn in freqs
    ])
    return SrsCurve(freqs, values, q_factor)


def srs_oracle(shock, freqs, q_factor=10.0, substeps=ORACLE_SUBSTEPS):
    """
    Maximax SRS by direct RK4 integration of z'' + 2 zeta wn z' + wn^2 z = -a_base.

    The base acceleration is linearly interpolated between samples and the
    integration advances `substeps` steps per sample for all frequencies at
    once. The absolute response -(2 zeta wn z' + wn^2 z) is read at the
    sample instants.
    """
    freqs = _check_grid(freqs, shock.sample_rate, q_factor)
    if substeps < 10:
        raise InvalidRange('oracle needs at least 10 sub-steps per sample')

    zeta = 1.0 / (2.0 * q_factor)
    omega = 2 * np.pi * freqs
    c = 2 * zeta * omega
    k = omega ** 2
    h = 1.0 / (shock.sample_rate * substeps)

    x = shock.samples
    z = np.zeros_like(freqs)
    v = np.zeros_like(freqs)
    peak = np.zeros_like(freqs)

    def accel(zz, vv, base):
        return -base - c * vv - k * zz

    for i in range(len(x)):
        # Response at sample i, before advancing
        np.maximum(peak, np.abs(c * v + k * z), out=peak)
        if i == len(x) - 1:
            break
        x0 = x[i]
        slope = x[i + 1] - x0
        for s in range(substeps):
            a_start = x0 + slope * s / substeps
            a_mid = x0 + slope * (s + 0.5) / substeps
            a_end = x0 + slope * (s + 1) / substeps

            k1z, k1v = v, accel(z, v, a_start)
            k2z, k2v = v + 0.5 * h * k1v, accel(z + 0.5 * h * k1z, v + 0.5 * h * k1v, a_mid)
            k3z, k3v = v + 0.5 * h * k2v, accel(z + 0.5 * h * k2z, v + 0.5 * h * k2v, a_mid)
            k4z, k4v = v + h * k3v, accel(z + h * k3z, v + h * k3v, a_end)

            z = z + h / 6 * (k1z + 2 * k2z + 2 * k3z + k4z)
            v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)

    return SrsCurve(freqs, peak, q_factor)
