"""
Experiment harness: method comparison, ablation study, directional checks,
SRS comparison tables and the reduced-model gradient check.
"""
import logging
import time
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from baselines import apply_zero_phase, design_lowpass
from calibnet import AblationFlags, Architecture, CalibModel, TrainConfig, train
from config import Config
from exceptions import MissingModelForMethod
from models import ShockSignal
from nn import ParamSet, forward, grad_check
from signals import evaluate
from srs import log_freq_grid, srs_maximax
from utils import parallel_map

logger = logging.getLogger(__name__)

METHODS = ('raw', 'lpf', 'lr', 'ae', 'net')

# Ordering tolerance between the ae and lr baselines (fraction, i.e. 0.3 percentage points)
ORDER_TOLERANCE = 0.003
RAW_EPS_P_RANGE = (0.10, 0.17)


@dataclass(frozen=True)
class Check:
    """One named pass/fail acceptance check."""
    name: str
    passed: bool
    detail: str

    def to_dict(self):
        return {'check': self.name, 'passed': self.passed, 'detail': self.detail}


# ============================================================================
# METHOD COMPARISON
# ============================================================================

def predict(method, signals, fir=None, linear=None, ae_model=None, net_model=None, threads=None):
    """
    Calibrated estimates of low-end signals by one method.

    Raises:
        MissingModelForMethod: the method's model was not supplied
    """
    signals = list(signals)
    if method == 'raw':
        return signals
    if method == 'lpf':
        fir = fir or design_lowpass(sample_rate=signals[0].sample_rate)
        return parallel_map(lambda s: apply_zero_phase(fir, s), signals, threads)
    if method == 'lr':
        if linear is None:
            raise MissingModelForMethod('method lr needs training data to fit the linear map')
        return parallel_map(linear.calibrate, signals, threads)
    if method == 'ae':
        if ae_model is None:
            raise MissingModelForMethod('method ae needs an autoencoder checkpoint')
        return ae_model.calibrate_many(signals)
    if method == 'net':
        if net_model is None:
            raise MissingModelForMethod('method net needs a calibration network checkpoint')
        return net_model.calibrate_many(signals)
    raise MissingModelForMethod(f'unknown method {method!r}; choose from {METHODS}')


def evaluate_methods(test_pairs, methods=METHODS, **models):
    """
    Evaluate several methods on the same test pairs.

    Returns:
        List of EvalReport in the order of methods, each with the wall time
        of its predictions
    """
    test_pairs = list(test_pairs)
    lows = [pair.low for pair in test_pairs]
    highs = [pair.high for pair in test_pairs]
    reports = []
    for method in methods:
        start = time.perf_counter()
        preds = predict(method, lows, **models)
        seconds = time.perf_counter() - start
        report = replace(evaluate(method, preds, highs), seconds=seconds)
        logger.info('%-4s eps_p %6.2f%%  eps_s %8.2f  (%.2f s)', method, 100 * report.eps_p, report.eps_s, seconds)
        reports.append(report)
    return reports


def check_table_directions(reports):
    """Directional comparison checks over a {method: EvalReport} mapping."""
    r = reports
    lo, hi = RAW_EPS_P_RANGE
    return [
        Check('raw eps_p in range', lo <= r['raw'].eps_p <= hi,
              f"{100 * r['raw'].eps_p:.2f}% in [{100 * lo:.0f}%, {100 * hi:.0f}%]"),
        Check('lpf eps_p > raw eps_p', r['lpf'].eps_p > r['raw'].eps_p,
              f"{100 * r['lpf'].eps_p:.2f}% vs {100 * r['raw'].eps_p:.2f}%"),
        Check('net eps_p < ae eps_p', r['net'].eps_p < r['ae'].eps_p,
              f"{100 * r['net'].eps_p:.2f}% vs {100 * r['ae'].eps_p:.2f}%, "
              f"gap {100 * (r['net'].eps_p - r['ae'].eps_p):+.2f} pp"),
        Check('ae eps_p <= lr eps_p', r['ae'].eps_p <= r['lr'].eps_p + ORDER_TOLERANCE,
              f"{100 * r['ae'].eps_p:.2f}% vs {100 * r['lr'].eps_p:.2f}%"),
        Check('net eps_s < raw eps_s', r['net'].eps_s < r['raw'].eps_s,
              f"{r['net'].eps_s:.2f} vs {r['raw'].eps_s:.2f}"),
        Check('lpf eps_s < raw eps_s', r['lpf'].eps_s < r['raw'].eps_s,
              f"{r['lpf'].eps_s:.2f} vs {r['raw'].eps_s:.2f}"),
    ]


# ============================================================================
# ABLATIONS
# ============================================================================

ABLATION_VARIANTS = {
    'full': AblationFlags(),
    'no-z': AblationFlags.from_ablations(['no-z']),
    'no-linf': AblationFlags.from_ablations(['no-linf']),
    'no-residual': AblationFlags.from_ablations(['no-residual']),
}


def ablation_study(train_pairs, test_pairs, seeds, train_config=None, arch=None):
    """
    Train every ablation variant for each seed and evaluate it.

    Returns:
        DataFrame with variant, seed, eps_p and eps_s columns
    """
    train_config = train_config or TrainConfig()
    arch = arch or Architecture()
    rows = []
    for variant, flags in ABLATION_VARIANTS.items():
        for seed in seeds:
            logger.info('Ablation %s, seed %d', variant, seed)
            model = CalibModel.build(replace(arch, flags=flags), seed=seed)
            train(model, train_pairs, replace(train_config, seed=seed))
            report = evaluate_methods(test_pairs, ['net'], net_model=model)[0]
            rows.append({'variant': variant, 'seed': seed, 'eps_p': report.eps_p, 'eps_s': report.eps_s})
    return pd.DataFrame(rows, columns=['variant', 'seed', 'eps_p', 'eps_s'])


def check_ablation_directions(study):
    """Each ablation must raise the seed-averaged eps_p of the full model."""
    means = study.groupby('variant', sort=False)['eps_p'].mean()
    full = means['full']
    return [
        Check(f'{variant} raises eps_p', means[variant] > full,
              f'{100 * means[variant]:.2f}% vs full {100 * full:.2f}%')
        for variant in ABLATION_VARIANTS if variant != 'full'
    ]


# ============================================================================
# SRS COMPARISON
# ============================================================================

def default_grid():
    return log_freq_grid(Config.SRS_F_MIN, Config.SRS_F_MAX, Config.SRS_POINTS_PER_OCTAVE)


def srs_table(pair, model=None, freqs=None, q_factor=Config.SRS_Q):
    """
    SRS of the low-end, high-end and calibrated signals of one pair.

    An all-zero low-end signal has an all-zero calibrated column.
    """
    freqs = default_grid() if freqs is None else freqs
    low, high = pair.low, pair.high
    columns = {
        'freq_hz': freqs,
        'srs_low': srs_maximax(low, freqs, q_factor).values,
        'srs_high': srs_maximax(high, freqs, q_factor).values,
    }
    if model is not None:
        columns['srs_calibrated'] = srs_maximax(_calibrated(pair, model), freqs, q_factor).values
    return pd.DataFrame(columns)


def _calibrated(pair, model):
    low = pair.low
    if low.peak_abs() == 0:
        return ShockSignal(np.zeros(len(low)), low.sample_rate)
    return model.calibrate(low)


def waveform_table(pair, model=None):
    """Time-domain low-end, high-end and (with a model) calibrated samples of one pair."""
    low, high = pair.low, pair.high
    columns = {
        'time_ms': 1000.0 * np.arange(len(low)) / low.sample_rate,
        'low_g': low.samples,
        'high_g': high.samples,
    }
    if model is not None:
        columns['calibrated_g'] = _calibrated(pair, model).samples
    return pd.DataFrame(columns)


def mean_log_ratio(values, reference, floor=1e-12):
    """Mean |ln(values / reference)| over grid points."""
    values = np.maximum(np.asarray(values, dtype=np.float64), floor)
    reference = np.maximum(np.asarray(reference, dtype=np.float64), floor)
    return float(np.mean(np.abs(np.log(values / reference))))


def check_srs_closeness(table):
    """Calibrated SRS must sit closer to the high-end SRS than the raw one does."""
    calibrated = mean_log_ratio(table['srs_calibrated'], table['srs_high'])
    raw = mean_log_ratio(table['srs_low'], table['srs_high'])
    return Check('calibrated SRS closer to high-end', calibrated < raw,
                 f'mean |log ratio| {calibrated:.4f} vs raw {raw:.4f}')


# ============================================================================
# GRADIENT CHECK
# ============================================================================

# A 1e-5 step moves pre-activations by about 1e-5, so points are kept well clear of kinks
KINK_MARGIN = 1e-4
# Relative-error floor; central differences at step 1e-5 carry ~1e-10 absolute rounding noise
GRADCHECK_FLOOR = 1e-6


def _random_batch(arch, rng, batch=2):
    """Random unit-peak shapes, shape targets and peaks for a reduced model."""
    def unit_rows():
        rows = rng.standard_normal((batch, arch.signal_length))
        return rows / np.max(np.abs(rows), axis=1, keepdims=True)
    p_x = rng.uniform(500.0, 8000.0, size=batch)
    p_ref = p_x * (1 + 0.1 * rng.standard_normal(batch))
    return unit_rows(), p_x, unit_rows(), p_ref


def _relu_margins(params, tape):
    return [np.abs(pre).min() for pre, layer in zip(tape.preacts, params) if layer.activation == 'relu']


def _kink_margin(model, x_n, target, p_x, p_ref):
    """Distance of a point from relu kinks, L-inf argmax ties and the |p_y - p_ref| kink."""
    z, enc_tape = forward(model.encoder, x_n)
    y, dec_tape = forward(model.decoder, z)
    margins = _relu_margins(model.encoder, enc_tape) + _relu_margins(model.decoder, dec_tape)
    top2 = np.sort(np.abs(y - target), axis=1)[:, -2:]
    margins.append((top2[:, 1] - top2[:, 0]).min())

    p_y, _, compress_tape, head_tape = model._ppn_forward(p_x, z)
    margins += _relu_margins(model.ppn_compress, compress_tape) + _relu_margins(model.ppn_head, head_tape)
    margins.append(np.abs(p_y - p_ref).min() / model.arch.peak_scale)
    return float(min(margins))


def calibnet_grad_check(dims=Config.GRADCHECK_DIMS, seed=1, points=Config.GRADCHECK_POINTS,
                        tolerance=Config.GRADCHECK_TOLERANCE, corrupt=False):
    """
    Finite-difference check of the shape loss (with and without the L-inf
    term) over theta and the peak loss over phi on a reduced model.

    Args:
        dims: (signal length, latent width, PPN compression width)
        corrupt: Scale analytic gradients by 1.01 (negative control)

    Returns:
        DataFrame with one row per (point, loss) and the max relative error
    """
    rng = np.random.default_rng(seed)
    arch = Architecture.reduced(*dims)
    rows = []
    point = 0
    while point < points:
        model = CalibModel.build(arch, seed=int(rng.integers(2 ** 32)))
        # Randomise the zero-initialised output layer so every phi coordinate is live
        last = model.ppn_head.layers[-1]
        last.weights[...] = rng.uniform(-0.5, 0.5, size=last.weights.shape)
        x_n, p_x, target, p_ref = _random_batch(arch, rng)
        if _kink_margin(model, x_n, target, p_x, p_ref) < KINK_MARGIN:
            continue
        point += 1
        fuzz = 1.01 if corrupt else 1.0

        for use_linf in (True, False):
            variant = CalibModel(replace(arch, flags=AblationFlags(use_linf_term=use_linf)),
                                 model.encoder, model.decoder, model.ppn_compress, model.ppn_head)
            theta = variant.theta

            def shape_loss(_, variant=variant):
                loss, grads, _ = variant.shape_loss_and_grads(x_n, target)
                return loss, ParamSet(grads['encoder'].layers + grads['decoder'].layers).scale(fuzz)

            report = grad_check(shape_loss, theta, tolerance, rng=rng, floor=GRADCHECK_FLOOR)
            rows.append({'point': point, 'loss': 'shape' if use_linf else 'shape-no-linf', **report.to_dict()})

        z = model.encode(x_n)

        def peak_loss(_):
            loss, grads = model.peak_loss_and_grads(z, p_x, p_ref)
            return loss, ParamSet(grads['ppn_compress'].layers + grads['ppn_head'].layers).scale(fuzz)

        report = grad_check(peak_loss, model.phi, tolerance, rng=rng, floor=GRADCHECK_FLOOR)
        rows.append({'point': point, 'loss': 'peak', **report.to_dict()})

    return pd.DataFrame(rows)
