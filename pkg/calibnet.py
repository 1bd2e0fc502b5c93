"""
Calibration network: encoder, decoder and peak prediction network (PPN).

The raw signal is split into a unit-peak shape x_n and its peak p_x. The
encoder maps x_n to a latent vector z, the decoder reconstructs the
calibrated shape y_n, and the PPN predicts the calibrated peak p_y from p_x
and a compressed copy of z. The shape loss trains the encoder and decoder;
the peak loss trains the PPN only, z entering the PPN as a constant.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import ClassVar, Optional

import numpy as np

from config import Config
from exceptions import DegenerateDecode, DimensionMismatch, EmptyDataset, InvalidConfig, NonPositivePeak
from models import ShockSignal
from nn import AdamState, DenseLayer, ParamSet, adam_step, backward, forward
from signals import normalize

logger = logging.getLogger(__name__)

PARAM_GROUPS = ('encoder', 'decoder', 'ppn_compress', 'ppn_head')
DECODE_FLOOR = 1e-9


@dataclass(frozen=True)
class AblationFlags:
    """Which parts of the full model are enabled."""
    ppn_uses_z: bool = True
    use_linf_term: bool = True
    ppn_residual: bool = True

    ABLATIONS: ClassVar[dict] = {
        'no-z': 'ppn_uses_z',
        'no-linf': 'use_linf_term',
        'no-residual': 'ppn_residual',
    }

    @classmethod
    def from_ablations(cls, names):
        """Flags with the named components ('no-z', 'no-linf', 'no-residual') removed."""
        disabled = {}
        for name in names:
            if name not in cls.ABLATIONS:
                raise InvalidConfig(f'unknown ablation {name!r}; choose from {sorted(cls.ABLATIONS)}')
            disabled[cls.ABLATIONS[name]] = False
        return cls(**disabled)

    def ablations(self):
        return [name for name, attr in self.ABLATIONS.items() if not getattr(self, attr)]

    @property
    def label(self):
        return '+'.join(self.ablations()) or 'full'


@dataclass(frozen=True)
class Architecture:
    """Layer widths and switches of a calibration model."""
    signal_length: int = 3000
    hidden_width: int = Config.HIDDEN_WIDTH
    latent_width: int = Config.LATENT_WIDTH
    ppn_width: int = Config.PPN_WIDTH
    ppn_hidden: int = Config.PPN_HIDDEN
    peak_scale: float = Config.PEAK_SCALE
    with_ppn: bool = True
    flags: AblationFlags = field(default_factory=AblationFlags)

    @classmethod
    def reduced(cls, signal_length, latent_width, ppn_width, **kwargs):
        """Small model for gradient checks: hidden widths twice the bottlenecks."""
        return cls(signal_length=signal_length, hidden_width=2 * latent_width, latent_width=latent_width,
                   ppn_width=ppn_width, ppn_hidden=2 * ppn_width, **kwargs)

    def layer_specs(self):
        """(in, out, activation) per layer for each parameter group."""
        L, H, Z = self.signal_length, self.hidden_width, self.latent_width
        specs = {
            'encoder': [(L, H, 'relu'), (H, Z, 'identity')],
            'decoder': [(Z, H, 'relu'), (H, L, 'identity')],
            'ppn_compress': [],
            'ppn_head': [],
        }
        if self.with_ppn:
            specs['ppn_compress'] = [(Z, self.ppn_width, 'relu')]
            # Head input: compressed z, p_x / peak_scale and its logarithm
            specs['ppn_head'] = [(self.ppn_width + 2, self.ppn_hidden, 'relu'), (self.ppn_hidden, 1, 'identity')]
        return specs

    def to_dict(self):
        """Convert architecture to the checkpoint header descriptor."""
        data = asdict(self)
        data['layers'] = {name: [list(spec) for spec in specs] for name, specs in self.layer_specs().items()}
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data.pop('layers', None)
        data['flags'] = AblationFlags(**data.get('flags', {}))
        return cls(**data)


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings; the PPN groups get their own Adam step size."""
    epochs: int = Config.EPOCHS
    batch_size: int = Config.BATCH_SIZE
    lr: float = Config.LEARNING_RATE
    seed: int = 0
    ppn_lr: float = Config.PPN_LEARNING_RATE

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.lr > 0 or not self.ppn_lr > 0:
            raise InvalidConfig(f'invalid training config {self}')
        return self

    def lr_for(self, group):
        return self.ppn_lr if group.startswith('ppn') else self.lr


@dataclass(frozen=True)
class EpochLoss:
    """Mean losses of one epoch; peak_loss is None for a model without a PPN."""
    epoch: int
    shape_loss: float
    peak_loss: Optional[float] = None

    def to_dict(self):
        row = asdict(self)
        if self.peak_loss is None:
            del row['peak_loss']
        return row


@dataclass
class TrainResult:
    model: 'CalibModel'
    trace: list


# ============================================================================
# LOSSES
# ============================================================================

def _shape_loss_rows(y, target, use_linf=True):
    """Per-row shape loss and its gradient for (batch, M) arrays."""
    d = y - target
    l2 = np.sqrt(np.sum(d * d, axis=1))
    safe = np.where(l2 > 0, l2, 1.0)
    grad = np.where(l2[:, None] > 0, d / safe[:, None], 0.0)
    loss = l2.copy()
    if use_linf:
        # First max-abs coordinate takes the whole subgradient
        idx = np.argmax(np.abs(d), axis=1)
        rows = np.arange(d.shape[0])
        loss += np.abs(d[rows, idx])
        grad[rows, idx] += np.sign(d[rows, idx])
    return loss, grad


def loss_shape(y_n, y_ref_n, use_linf=True):
    """||y_n - y_ref_n||_2 + ||y_n - y_ref_n||_inf (the second term optional)."""
    loss, _ = loss_shape_grad(y_n, y_ref_n, use_linf)
    return loss


def loss_shape_grad(y_n, y_ref_n, use_linf=True):
    """Shape loss of one vector pair and its gradient w.r.t. y_n."""
    y_n = np.asarray(y_n, dtype=np.float64)
    y_ref_n = np.asarray(y_ref_n, dtype=np.float64)
    if y_n.shape != y_ref_n.shape or y_n.ndim != 1:
        raise DimensionMismatch(f'shape loss needs equal 1-D vectors, got {y_n.shape} and {y_ref_n.shape}')
    loss, grad = _shape_loss_rows(y_n[None, :], y_ref_n[None, :], use_linf)
    return float(loss[0]), grad[0]


def loss_peak(p_y, p_ref):
    """Absolute peak error in g."""
    loss, _ = loss_peak_grad(p_y, p_ref)
    return loss


def loss_peak_grad(p_y, p_ref):
    """Peak loss and its subgradient sign(p_y - p_ref) (0 at equality)."""
    if not p_ref > 0:
        raise NonPositivePeak(f'reference peak must be positive, got {p_ref}')
    diff = float(p_y) - float(p_ref)
    return abs(diff), float(np.sign(diff))


# ============================================================================
# MODEL
# ============================================================================

class CalibModel:
    """Encoder (theta_1), decoder (theta_2) and PPN (phi) with their architecture."""

    def __init__(self, arch, encoder, decoder, ppn_compress, ppn_head):
        self.arch = arch
        self.encoder = encoder
        self.decoder = decoder
        self.ppn_compress = ppn_compress
        self.ppn_head = ppn_head

    def __repr__(self):
        return f'<CalibModel {self.arch.flags.label} ppn={self.arch.with_ppn} params={self.size}>'

    @classmethod
    def build(cls, arch=None, seed=0):
        """Seeded He-uniform initialisation; the last PPN layer starts at zero."""
        arch = arch or Architecture()
        rng = np.random.default_rng(seed)
        groups = {}
        for name in PARAM_GROUPS:
            layers = [DenseLayer.he_uniform(i, o, act, rng) for i, o, act in arch.layer_specs()[name]]
            groups[name] = ParamSet(layers)
        if arch.with_ppn:
            last = groups['ppn_head'].layers[-1]
            groups['ppn_head'].layers[-1] = DenseLayer.zeros(last.in_dim, last.out_dim, last.activation)
        return cls(arch, **groups)

    @classmethod
    def zeros(cls, arch=None):
        """Model with every parameter set to zero."""
        model = cls.build(arch)
        for params in model.param_groups().values():
            params.assign(np.zeros(params.size))
        return model

    def param_groups(self):
        """Parameter groups in checkpoint order."""
        return {name: getattr(self, name) for name in PARAM_GROUPS}

    @property
    def theta(self):
        """Encoder and decoder parameters as one ParamSet sharing the underlying layers."""
        return ParamSet(self.encoder.layers + self.decoder.layers)

    @property
    def phi(self):
        """All PPN parameters as one ParamSet sharing the underlying layers."""
        return ParamSet(self.ppn_compress.layers + self.ppn_head.layers)

    @property
    def size(self):
        return sum(params.size for params in self.param_groups().values())

    # ------------------------------------------------------------------
    # Inference
    # ------------------------------------------------------------------

    def encode(self, x_n):
        """z = enc(x_n; theta_1)."""
        z, _ = forward(self.encoder, x_n)
        return z

    def decode(self, z):
        """y_n = dec(z; theta_2)."""
        y, _ = forward(self.decoder, z)
        return y

    def _ppn_forward(self, p_x, z):
        """Batched PPN pass; returns (p_y, dp_y/dr, compress tape, head tape)."""
        z = np.zeros_like(z) if not self.arch.flags.ppn_uses_z else np.array(z, copy=True)
        h, compress_tape = forward(self.ppn_compress, z)
        scaled = p_x / self.arch.peak_scale
        u = np.concatenate([h, scaled[:, None], np.log(scaled)[:, None]], axis=1)
        r, head_tape = forward(self.ppn_head, u)
        if self.arch.flags.ppn_residual:
            # r is a correction relative to the input peak: p_y = p_x (1 + r)
            out_scale = p_x
            p_y = p_x + r[:, 0] * out_scale
        else:
            out_scale = np.full_like(p_x, self.arch.peak_scale)
            p_y = r[:, 0] * out_scale
        return p_y, out_scale, compress_tape, head_tape

    def ppn_predict(self, p_x, z):
        """
        Predict the calibrated peak.

        Args:
            p_x: Input peak in g (scalar or batch)
            z: Latent vector(s) from encode

        Returns:
            p_y in g, same batch shape as p_x
        """
        if not self.arch.with_ppn:
            raise InvalidConfig('model was built without a PPN')
        scalar = np.ndim(p_x) == 0
        p_x = np.atleast_1d(np.asarray(p_x, dtype=np.float64))
        if np.any(~(p_x > 0)):
            raise NonPositivePeak('input peak must be positive')
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[0] != p_x.shape[0]:
            raise DimensionMismatch(f'{z.shape[0]} latent vectors for {p_x.shape[0]} peaks')
        p_y, _, _, _ = self._ppn_forward(p_x, z)
        return float(p_y[0]) if scalar else p_y

    def calibrate_many(self, signals):
        """Calibrate a batch of preprocessed low-end signals."""
        signals = list(signals)
        if not signals:
            return []
        normalized = [normalize(s) for s in signals]
        x_n = np.stack([n.shape for n in normalized])
        p_x = np.array([n.peak for n in normalized])

        z = self.encode(x_n)
        y_n = self.decode(z)
        if self.arch.with_ppn:
            p_y = self.ppn_predict(p_x, z)
            amplitude = np.max(np.abs(y_n), axis=1)
            if np.any(amplitude < DECODE_FLOOR):
                raise DegenerateDecode(f'decoder output peak {amplitude.min():.3g} too small to renormalize')
            y_pred = y_n / amplitude[:, None] * p_y[:, None]
        else:
            # Plain autoencoder: decoder amplitude relative to the input peak
            y_pred = y_n * p_x[:, None]
        return [ShockSignal(row, s.sample_rate) for row, s in zip(y_pred, signals)]

    def calibrate(self, x_r):
        """Map one preprocessed low-end signal to a high-end estimate."""
        return self.calibrate_many([x_r])[0]

    # ------------------------------------------------------------------
    # Training passes
    # ------------------------------------------------------------------

    def shape_loss_and_grads(self, x_n, target):
        """Mean shape loss over a batch and its gradients w.r.t. theta_1 and theta_2."""
        z, enc_tape = forward(self.encoder, x_n)
        y, dec_tape = forward(self.decoder, z)
        rows, dy = _shape_loss_rows(y, target, self.arch.flags.use_linf_term)
        batch = x_n.shape[0]
        dec_grads, dz = backward(self.decoder, dec_tape, dy / batch)
        enc_grads, _ = backward(self.encoder, enc_tape, dz)
        return float(rows.mean()), {'encoder': enc_grads, 'decoder': dec_grads}, z

    def peak_loss_and_grads(self, z, p_x, p_ref):
        """Mean peak loss over a batch and its gradients w.r.t. phi; z is held constant."""
        p_y, out_scale, compress_tape, head_tape = self._ppn_forward(p_x, z)
        diff = p_y - p_ref
        batch = len(p_x)
        dr = (np.sign(diff) / batch * out_scale)[:, None]
        head_grads, du = backward(self.ppn_head, head_tape, dr)
        compress_grads, _ = backward(self.ppn_compress, compress_tape, du[:, :self.arch.ppn_width])
        # The gradient w.r.t. z is discarded: no path back into the encoder
        return float(np.abs(diff).mean()), {'ppn_compress': compress_grads, 'ppn_head': head_grads}

    def joint_gradients(self, x_n, p_x, target, p_ref):
        """
        Losses and gradients of one batch under the gradient partition.

        Returns:
            Tuple of (shape loss, peak loss or None without a PPN, gradients per parameter group)
        """
        shape_loss, grads, z = self.shape_loss_and_grads(x_n, target)
        peak_loss = None
        if self.arch.with_ppn:
            peak_loss, peak_grads = self.peak_loss_and_grads(z, p_x, p_ref)
            grads.update(peak_grads)
        return shape_loss, peak_loss, grads


# ============================================================================
# TRAINING
# ============================================================================

def training_arrays(model, pairs):
    """Stack normalized inputs, input peaks, shape targets and reference peaks."""
    inputs = [normalize(pair.low) for pair in pairs]
    x_n = np.stack([n.shape for n in inputs])
    p_x = np.array([n.peak for n in inputs])
    highs = np.stack([pair.high.samples for pair in pairs])
    p_ref = np.max(np.abs(highs), axis=1)
    if model.arch.with_ppn:
        target = highs / p_ref[:, None]
    else:
        # Decoder amplitude relative to the input peak carries the peak correction
        target = highs / p_x[:, None]
    if x_n.shape[1] != model.arch.signal_length:
        raise DimensionMismatch(f'signals have {x_n.shape[1]} samples, model expects {model.arch.signal_length}')
    return x_n, p_x, target, p_ref


def train(model, pairs, config=None):
    """
    Minimise the shape loss over (theta_1, theta_2) and the peak loss over phi.

    Args:
        model: CalibModel, updated in place
        pairs: Sequence of preprocessed SignalPair
        config: TrainConfig

    Returns:
        TrainResult with the model and per-epoch mean losses
    """
    config = (config or TrainConfig()).validate()
    pairs = list(pairs)
    if not pairs:
        raise EmptyDataset('no training pairs')

    x_n, p_x, target, p_ref = training_arrays(model, pairs)
    groups = {name: params for name, params in model.param_groups().items() if params.size}
    states = {name: AdamState.for_params(params, lr=config.lr_for(name)) for name, params in groups.items()}

    n = len(pairs)
    trace = []
    report_every = max(1, config.epochs // 10)
    logger.info('Training %r on %d pairs for %d epochs', model, n, config.epochs)

    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        shape_total = peak_total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            shape_loss, peak_loss, grads = model.joint_gradients(x_n[idx], p_x[idx], target[idx], p_ref[idx])
            for name, params in groups.items():
                adam_step(params, grads[name], states[name])
            shape_total += shape_loss * len(idx)
            if peak_loss is not None:
                peak_total += peak_loss * len(idx)

        record = EpochLoss(epoch, shape_total / n, peak_total / n if model.arch.with_ppn else None)
        trace.append(record)
        progress = epoch % report_every == 0 or epoch == config.epochs
        if record.peak_loss is None:
            logger.debug('epoch %d: shape %.5f', epoch, record.shape_loss)
            if progress:
                logger.info('epoch %d/%d  L^s %.4f', epoch, config.epochs, record.shape_loss)
        else:
            logger.debug('epoch %d: shape %.5f peak %.3f', epoch, record.shape_loss, record.peak_loss)
            if progress:
                logger.info('epoch %d/%d  L^s %.4f  L^p %.2f g', epoch, config.epochs,
                            record.shape_loss, record.peak_loss)

    return TrainResult(model, trace)
