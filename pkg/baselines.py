"""
Comparison methods: zero-phase low-pass filter, ridge linear regression and
the autoencoder without peak prediction.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg
from scipy import signal as sps

from calibnet import Architecture, CalibModel, TrainConfig, train
from config import Config
from exceptions import DegenerateDecode, EmptyDataset, FilterTooLong, InvalidCutoff, SingularSystem
from models import ShockSignal
from signals import normalize

logger = logging.getLogger(__name__)

# Hamming window: transition width ~ 3.3 * fs / numtaps
HAMMING_WIDTH_FACTOR = 3.3


@dataclass(frozen=True, eq=False)
class FirFilter:
    """Linear-phase FIR low-pass filter."""
    taps: np.ndarray
    cutoff: float
    sample_rate: float
    design: str = 'hamming-windowed-sinc'

    def __len__(self):
        return len(self.taps)


def design_lowpass(cutoff=Config.LPF_CUTOFF, sample_rate=Config.SAMPLE_RATE, transition_width=Config.LPF_TRANSITION):
    """
    Hamming-windowed sinc low-pass with unit DC gain.

    Args:
        cutoff: -6 dB frequency in Hz
        sample_rate: Sampling rate in Hz
        transition_width: Approximate transition band width in Hz
    """
    nyquist = sample_rate / 2
    if not 0 < cutoff < nyquist:
        raise InvalidCutoff(f'cutoff {cutoff} Hz must lie in (0, {nyquist})')
    if not transition_width > 0:
        raise InvalidCutoff('transition width must be positive')

    numtaps = int(np.ceil(HAMMING_WIDTH_FACTOR * sample_rate / transition_width))
    numtaps += 1 - numtaps % 2  # odd length: symmetric type I filter
    taps = sps.firwin(numtaps, cutoff, window='hamming', fs=sample_rate)
    taps = taps / taps.sum()
    # Enforce exact symmetry after normalisation
    taps = 0.5 * (taps + taps[::-1])
    return FirFilter(taps, float(cutoff), float(sample_rate))


def apply_zero_phase(fir, shock):
    """Forward-backward filtering with mirrored edges (zero group delay)."""
    if len(fir) >= len(shock):
        raise FilterTooLong(f'{len(fir)} taps for a {len(shock)}-sample signal')
    filtered = sps.filtfilt(fir.taps, [1.0], shock.samples, padtype='even', padlen=len(fir) - 1)
    return ShockSignal(filtered, shock.sample_rate)


# ============================================================================
# LINEAR REGRESSION
# ============================================================================

@dataclass(frozen=True, eq=False)
class LinearMap:
    """Ridge map between normalized shapes plus a scalar peak regression."""
    matrix: np.ndarray      # (M, M): y_n = x_n @ matrix + intercept
    intercept: np.ndarray
    peak_slope: float
    peak_intercept: float
    ridge_lambda: float
    fitted: bool = True

    def predict_shape(self, x_n):
        return x_n @ self.matrix + self.intercept

    def predict_peak(self, p_x):
        return self.peak_slope * p_x + self.peak_intercept

    def calibrate(self, shock):
        """Predict a high-end signal from one preprocessed low-end signal."""
        normalized = normalize(shock)
        y_n = self.predict_shape(normalized.shape)
        amplitude = np.max(np.abs(y_n))
        if amplitude < 1e-9:
            raise DegenerateDecode('linear map produced an all-zero shape')
        return ShockSignal(y_n / amplitude * self.predict_peak(normalized.peak), shock.sample_rate)


def _ridge_solve(X, Y, ridge_lambda):
    """
    Ridge weights for centred X (N, D) and Y (N, K) via Cholesky.

    Uses the primal normal equations when D <= N and the dual (Gram) form
    otherwise; both give the same weights.
    """
    n, d = X.shape
    primal = d <= n
    gram = X.T @ X if primal else X @ X.T
    if ridge_lambda == 0 and np.linalg.matrix_rank(gram) < len(gram):
        raise SingularSystem(f'rank-deficient normal equations ({len(gram)} unknowns) with lambda=0')
    try:
        factor = linalg.cho_factor(gram + ridge_lambda * np.eye(len(gram)))
        if primal:
            return linalg.cho_solve(factor, X.T @ Y)
        return X.T @ linalg.cho_solve(factor, Y)
    except linalg.LinAlgError as e:
        raise SingularSystem(f'normal equations not positive definite (lambda={ridge_lambda}): {e}') from e


def fit_linear(train_pairs, ridge_lambda=Config.RIDGE_LAMBDA):
    """
    Fit the linear-regression baseline in closed form.

    Args:
        train_pairs: Sequence of SignalPair (at least two)
        ridge_lambda: Ridge penalty (>= 0); 0 may raise SingularSystem

    Returns:
        LinearMap
    """
    train_pairs = list(train_pairs)
    if len(train_pairs) < 2:
        raise EmptyDataset('linear regression needs at least 2 pairs')
    if ridge_lambda < 0:
        raise SingularSystem('ridge lambda must be non-negative')

    lows = [normalize(p.low) for p in train_pairs]
    highs = [normalize(p.high) for p in train_pairs]
    X = np.stack([n.shape for n in lows])
    Y = np.stack([n.shape for n in highs])

    x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
    logger.info('Fitting %dx%d ridge map on %d pairs (lambda=%g)', X.shape[1], Y.shape[1], len(X), ridge_lambda)
    matrix = _ridge_solve(X - x_mean, Y - y_mean, ridge_lambda)
    intercept = y_mean - x_mean @ matrix

    p_x = np.array([n.peak for n in lows])
    p_ref = np.array([n.peak for n in highs])
    px_c = p_x - p_x.mean()
    denominator = px_c @ px_c + ridge_lambda
    if denominator <= 0:
        raise SingularSystem('input peaks have no spread')
    slope = float(px_c @ (p_ref - p_ref.mean()) / denominator)
    peak_intercept = float(p_ref.mean() - slope * p_x.mean())

    return LinearMap(matrix, intercept, slope, peak_intercept, float(ridge_lambda))


# ============================================================================
# AUTOENCODER
# ============================================================================

def ae_baseline(train_pairs, config=None, arch=None, seed=0):
    """
    Train the encoder/decoder alone with the shape loss (no PPN).

    Returns:
        TrainResult whose model has no phi parameters
    """
    arch = replace(arch or Architecture(), with_ppn=False)
    model = CalibModel.build(arch, seed=seed)
    return train(model, train_pairs, config or TrainConfig(seed=seed))
