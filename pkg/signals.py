"""
Signal preprocessing and evaluation metrics.

Peaks used for windowing and normalization are maximum ABSOLUTE values
(ringing goes negative); the two evaluation metrics use the signed maximum.
"""
import numpy as np

from config import Config
from exceptions import DegenerateSignal, MismatchedSets, NonPositivePeak, NonPositiveReferencePeak
from models import EvalReport, NormalizedSignal, ShockSignal


def detect_peak(signal):
    """
    Locate the largest-magnitude sample.

    Args:
        signal: ShockSignal

    Returns:
        Tuple of (index, signed sample value); ties go to the smallest index
    """
    samples = signal.samples
    if len(samples) == 0:
        raise DegenerateSignal('cannot detect the peak of an empty signal')
    # np.argmax returns the first occurrence
    index = int(np.argmax(np.abs(samples)))
    if samples[index] == 0:
        raise DegenerateSignal('signal is all zeros')
    return index, float(samples[index])


def window_sizes(sample_rate):
    """Return (samples before peak, window length) for a sample rate."""
    pre = int(round(Config.PRE_PEAK_SECONDS * sample_rate))
    length = int(round(Config.WINDOW_SECONDS * sample_rate))
    return pre, length


def window_around_peak(raw):
    """
    Cut a fixed-duration window around the peak, zero-padding outside the record.

    At 200 kHz the window is 3000 samples with the peak at index 500.
    """
    peak_index, _ = detect_peak(raw)
    pre, length = window_sizes(raw.sample_rate)

    start = peak_index - pre
    out = np.zeros(length)
    src_lo = max(start, 0)
    src_hi = min(start + length, len(raw))
    out[src_lo - start:src_hi - start] = raw.samples[src_lo:src_hi]
    return ShockSignal(out, raw.sample_rate)


def normalize(signal):
    """Split a signal into its unit-peak shape and its max-abs peak."""
    _, value = detect_peak(signal)
    peak = abs(value)
    return NormalizedSignal(signal.samples / peak, peak, signal.sample_rate)


def denormalize(normalized):
    """Scale a normalized shape back to g."""
    if not normalized.peak > 0:
        raise NonPositivePeak(f'peak must be positive, got {normalized.peak}')
    return ShockSignal(normalized.shape * normalized.peak, normalized.sample_rate)


def _stack_sets(preds, refs):
    """Validate metric inputs and return (pred matrix, ref matrix, ref maxima)."""
    preds = list(preds)
    refs = list(refs)
    if not refs or len(preds) != len(refs):
        raise MismatchedSets(f'got {len(preds)} predictions for {len(refs)} references')
    lengths = {len(s) for s in preds} | {len(s) for s in refs}
    if len(lengths) != 1:
        raise MismatchedSets(f'signals have differing lengths {sorted(lengths)}')

    pred_matrix = np.stack([s.samples for s in preds])
    ref_matrix = np.stack([s.samples for s in refs])
    ref_max = ref_matrix.max(axis=1)
    if np.any(ref_max <= 0):
        bad = int(np.argmax(ref_max <= 0))
        raise NonPositiveReferencePeak(f'reference {bad} has non-positive maximum {ref_max[bad]}')
    return pred_matrix, ref_matrix, ref_max


def peak_errors(preds, refs):
    """Per-signal |max(pred) - max(ref)| / max(ref)."""
    pred_matrix, _, ref_max = _stack_sets(preds, refs)
    return np.abs(pred_matrix.max(axis=1) - ref_max) / ref_max


def shape_errors(preds, refs):
    """Per-signal sum_j |pred_j - ref_j| / max(ref)."""
    pred_matrix, ref_matrix, ref_max = _stack_sets(preds, refs)
    return np.abs(pred_matrix - ref_matrix).sum(axis=1) / ref_max


def metric_eps_p(preds, refs):
    """Mean relative peak error (a fraction, not a percentage)."""
    return float(np.mean(peak_errors(preds, refs)))


def metric_eps_s(preds, refs):
    """Mean peak-normalized summed absolute shape error."""
    return float(np.mean(shape_errors(preds, refs)))


def evaluate(method, preds, refs):
    """Compute an EvalReport for one method's predictions."""
    return EvalReport.from_errors(method, peak_errors(preds, refs), shape_errors(preds, refs))
