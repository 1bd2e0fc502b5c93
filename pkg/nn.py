"""
Dense neural-network kernel: forward and reverse-mode passes, parameter
containers, the Adam optimizer and finite-difference gradient checking.

Inputs are either a single vector of shape (in,) or a batch of shape
(batch, in). Gradients returned by backward are summed over the batch.
"""
from dataclasses import dataclass, field

import numpy as np

from exceptions import DimensionMismatch, InvalidRange, ShapeMismatch, StaleTape

ACTIVATIONS = ('relu', 'identity')


@dataclass(eq=False)
class DenseLayer:
    """Affine map followed by an activation; weights are (out, in)."""
    weights: np.ndarray
    biases: np.ndarray
    activation: str = 'relu'
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DimensionMismatch(f'weights {self.weights.shape} and biases {self.biases.shape} disagree')
        if self.activation not in ACTIVATIONS:
            raise InvalidRange(f'unknown activation {self.activation!r}')

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, in_dim, out_dim, activation='relu'):
        return cls(np.zeros((out_dim, in_dim)), np.zeros(out_dim), activation)

    @classmethod
    def he_uniform(cls, in_dim, out_dim, activation, rng):
        """He-uniform weights, zero biases."""
        limit = np.sqrt(6.0 / in_dim)
        return cls(rng.uniform(-limit, limit, size=(out_dim, in_dim)), np.zeros(out_dim), activation)


class ParamSet:
    """
    Ordered collection of dense layers with a stable flat index.

    The flat order is layer by layer, weights (row-major) then biases.
    Layers may be shared between ParamSets; updates through one are seen by
    the other.
    """

    def __init__(self, layers=()):
        self.layers = list(layers)

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def __repr__(self):
        dims = [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers] if self.layers else []
        return f'<ParamSet dims={dims} size={self.size}>'

    def arrays(self):
        """Parameter arrays in flat order."""
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.biases))
        return out

    @property
    def size(self):
        return sum(a.size for a in self.arrays())

    def flatten(self):
        arrays = self.arrays()
        if not arrays:
            return np.zeros(0)
        return np.concatenate([a.ravel() for a in arrays])

    def unflatten(self, vector):
        """New ParamSet of this structure holding the values of vector."""
        clone = self.zeros_like()
        clone.assign(vector)
        return clone

    def assign(self, vector):
        """Overwrite the parameters in place from a flat vector."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.size,):
            raise ShapeMismatch(f'flat vector has shape {vector.shape}, expected ({self.size},)')
        offset = 0
        for array in self.arrays():
            array[...] = vector[offset:offset + array.size].reshape(array.shape)
            offset += array.size
        self.touch()

    def zeros_like(self):
        return ParamSet(DenseLayer.zeros(layer.in_dim, layer.out_dim, layer.activation) for layer in self.layers)

    def touch(self):
        """Mark parameters as changed so earlier tapes become stale."""
        for layer in self.layers:
            layer.version += 1

    def scale(self, factor):
        """Multiply every parameter in place."""
        for array in self.arrays():
            array *= factor
        return self


@dataclass
class Tape:
    """Activations cached by forward for the matching backward call."""
    inputs: list
    preacts: list
    layer_ids: tuple
    versions: tuple
    batched: bool


def _as_batch(x, in_dim):
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    xb = x if batched else x[np.newaxis, :]
    if xb.ndim != 2 or xb.shape[1] != in_dim:
        raise DimensionMismatch(f'input has shape {x.shape}, layer expects width {in_dim}')
    return xb, batched


def forward(net, x):
    """
    Run a stack of dense layers.

    Args:
        net: Sequence of DenseLayer (or ParamSet)
        x: Input vector (in,) or batch (batch, in)

    Returns:
        Tuple of (output, Tape)
    """
    layers = list(net)
    if not layers:
        raise DimensionMismatch('cannot run an empty network')
    h, batched = _as_batch(x, layers[0].in_dim)
    inputs, preacts = [], []
    for layer in layers:
        if h.shape[1] != layer.in_dim:
            raise DimensionMismatch(f'layer expects width {layer.in_dim}, got {h.shape[1]}')
        inputs.append(h)
        pre = h @ layer.weights.T + layer.biases
        preacts.append(pre)
        h = np.maximum(pre, 0.0) if layer.activation == 'relu' else pre
    tape = Tape(inputs, preacts, tuple(id(layer) for layer in layers),
                tuple(layer.version for layer in layers), batched)
    return (h if batched else h[0]), tape


def backward(net, tape, grad_output):
    """
    Reverse-mode pass for a tape recorded by forward.

    relu uses subgradient 0 at a pre-activation of exactly 0.

    Returns:
        Tuple of (ParamSet of parameter gradients, gradient w.r.t. the input)
    """
    layers = list(net)
    if (tuple(id(layer) for layer in layers) != tape.layer_ids
            or tuple(layer.version for layer in layers) != tape.versions):
        raise StaleTape('tape was recorded for different or since-updated parameters')

    g = np.asarray(grad_output, dtype=np.float64)
    g = g if tape.batched else g[np.newaxis, :]
    if g.shape != tape.preacts[-1].shape:
        raise DimensionMismatch(f'output gradient has shape {g.shape}, expected {tape.preacts[-1].shape}')

    grads = []
    for layer, h, pre in zip(reversed(layers), reversed(tape.inputs), reversed(tape.preacts)):
        if layer.activation == 'relu':
            g = g * (pre > 0)
        grads.append(DenseLayer(g.T @ h, g.sum(axis=0), layer.activation))
        g = g @ layer.weights
    grads.reverse()
    return ParamSet(grads), (g if tape.batched else g[0])


@dataclass
class AdamState:
    """Moment accumulators and hyperparameters of Adam."""
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays],
                   0, lr, beta1, beta2, eps)


def adam_step(params, grads, state):
    """
    One bias-corrected Adam update.

    params and state are updated in place and also returned; every layer's
    version is bumped so tapes recorded before the step become stale.
    """
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(state.m) != len(p_arrays) or any(
            p.shape != g.shape or p.shape != m.shape for p, g, m in zip(p_arrays, g_arrays, state.m)):
        raise ShapeMismatch('parameters, gradients and Adam moments must share one structure')

    state.t += 1
    correction1 = 1 - state.beta1 ** state.t
    correction2 = 1 - state.beta2 ** state.t
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * np.square(g)
        step = v / correction2
        np.sqrt(step, out=step)
        step += state.eps
        np.divide(m, step, out=step)
        step *= state.lr / correction1
        p -= step
    params.touch()
    return params, state


@dataclass(frozen=True)
class GradCheckReport:
    """Worst disagreement between analytic and finite-difference gradients."""
    max_rel_error: float
    worst_index: int
    n_checked: int
    tolerance: float

    @property
    def passed(self):
        return self.max_rel_error <= self.tolerance

    def to_dict(self):
        return {
            'max_rel_error': self.max_rel_error,
            'worst_index': self.worst_index,
            'n_checked': self.n_checked,
            'tolerance': self.tolerance,
            'passed': self.passed,
        }


def grad_check(loss_fn, params, tolerance=1e-4, n_coords=200, step=1e-5, rng=None, floor=1e-8):
    """
    Compare analytic gradients with central finite differences.

    Args:
        loss_fn: Callable(params) -> (loss, ParamSet of gradients)
        params: ParamSet perturbed in place (restored afterwards)
        tolerance: Pass threshold on the max relative error
        n_coords: Coordinates sampled (all of them if the set is smaller)
        step: Finite-difference step
        rng: numpy Generator for coordinate sampling
        floor: Lower bound of the relative-error denominator

    Returns:
        GradCheckReport
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    base = params.flatten()
    _, grads = loss_fn(params)
    analytic = grads.flatten()

    if base.size <= n_coords:
        coords = np.arange(base.size)
    else:
        coords = np.sort(rng.choice(base.size, size=n_coords, replace=False))

    worst, worst_index = 0.0, -1
    probe = base.copy()
    try:
        for i in coords:
            probe[i] = base[i] + step
            params.assign(probe)
            plus, _ = loss_fn(params)
            probe[i] = base[i] - step
            params.assign(probe)
            minus, _ = loss_fn(params)
            probe[i] = base[i]

            numeric = (plus - minus) / (2 * step)
            a = analytic[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            if rel > worst:
                worst, worst_index = rel, int(i)
    finally:
        params.assign(base)

    return GradCheckReport(float(worst), worst_index, len(coords), tolerance)
