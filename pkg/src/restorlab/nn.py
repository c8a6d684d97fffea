"""Fully-connected ReLU networks with hand-written reverse-mode gradients.

Networks map row-batched inputs ``(n, in)`` to ``(n, out)``. Weights are
stored as ``(out, in)`` matrices. ReLU follows every layer except the last.
"""

import struct
from dataclasses import dataclass

import numpy as np

from ._validation import InvalidArgument, check_count, make_rng

__all__ = [
    "MlpParams",
    "ForwardTrace",
    "AdamState",
    "mlp_init",
    "forward",
    "backward",
    "r1_penalty_grad",
    "adam_init",
    "adam_step",
    "save_params",
    "load_params",
]

_MAGIC = b"RLMP"
_VERSION = 1


class MlpParams:
    """Ordered ``(weight, bias)`` pairs of an MLP.

    Also used to hold gradients, which share the parameter layout.
    """

    def __init__(self, layers):
        layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in layers]
        if not layers:
            raise InvalidArgument("an MLP needs at least one layer")
        for i, (w, b) in enumerate(layers):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidArgument(f"layer {i}: weight {w.shape} and bias {b.shape} do not match")
            if i and w.shape[1] != layers[i - 1][0].shape[0]:
                raise InvalidArgument(f"layer {i} input width {w.shape[1]} does not chain")
        self.layers = layers

    @property
    def sizes(self):
        return [self.layers[0][0].shape[1]] + [w.shape[0] for w, _ in self.layers]

    def arrays(self):
        return [a for pair in self.layers for a in pair]

    @classmethod
    def from_arrays(cls, arrays):
        return cls(list(zip(arrays[0::2], arrays[1::2])))

    def copy(self):
        return MlpParams([(w.copy(), b.copy()) for w, b in self.layers])

    def zeros_like(self):
        return MlpParams([(np.zeros_like(w), np.zeros_like(b)) for w, b in self.layers])

    def __add__(self, other):
        return MlpParams.from_arrays([a + b for a, b in zip(self.arrays(), other.arrays())])

    def __sub__(self, other):
        return MlpParams.from_arrays([a - b for a, b in zip(self.arrays(), other.arrays())])

    def __mul__(self, scalar):
        return MlpParams.from_arrays([a * scalar for a in self.arrays()])

    __rmul__ = __mul__

    def allclose(self, other, **kw):
        return all(np.allclose(a, b, **kw) for a, b in zip(self.arrays(), other.arrays()))

    def array_equal(self, other):
        return self.sizes == other.sizes and all(
            np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays())
        )

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def __repr__(self):
        return f"MlpParams(sizes={self.sizes})"


@dataclass
class ForwardTrace:
    """Activations kept for the backward pass.

    ``activations[0]`` is the input; ``preacts[l]`` is the affine output of
    layer ``l``.
    """

    activations: list
    preacts: list


def mlp_init(layer_sizes, seed, gain=1.0, bias=False):
    """Fan-in scaled uniform weights ``U(+-gain/sqrt(fan_in))``.

    Biases are zero unless ``bias`` is set, in which case they are drawn
    from the same range. ``gain=sqrt(6)`` gives He-uniform scaling.
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise InvalidArgument("need at least an input and an output size")
    sizes = [check_count(s, "layer size") for s in sizes]
    if not gain > 0:
        raise InvalidArgument("gain must be positive")
    rng = make_rng(seed, 10)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = gain / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out) if bias else np.zeros(fan_out)
        layers.append((w, b))
    return MlpParams(layers)


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.sizes[0]:
        raise InvalidArgument(f"input shape {x.shape} does not match network input width {params.sizes[0]}")
    return x, squeeze


def forward(params, x):
    """Evaluate the network. Returns ``(output, trace)``."""
    x, squeeze = _as_batch(params, x)
    acts, pre = [x], []
    h = x
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        a = h @ w.T + b
        pre.append(a)
        h = a if i == last else np.maximum(a, 0.0)
        acts.append(h)
    out = h[0] if squeeze else h
    return out, ForwardTrace(acts, pre)


def _backward_preacts(params, trace, grad_out):
    """Gradients w.r.t. each layer's pre-activation, last layer first."""
    g = grad_out
    grads = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        if i != len(params.layers) - 1:
            g = g * (trace.preacts[i] > 0.0)
        grads[i] = g
        g = g @ params.layers[i][0]
    return grads, g


def backward(params, trace, output_gradient):
    """Gradients of ``sum(output_gradient * output)``.

    Returns ``(param_gradients, input_gradient)``; parameter gradients are
    summed over the batch. The ReLU derivative at 0 is taken as 0.
    """
    go = np.asarray(output_gradient, dtype=np.float64)
    squeeze = go.ndim == 1
    if squeeze:
        go = go[None, :]
    n = trace.activations[0].shape[0]
    if go.shape != (n, params.sizes[-1]):
        raise InvalidArgument(f"output gradient shape {go.shape} does not match ({n}, {params.sizes[-1]})")
    pre_grads, gin = _backward_preacts(params, trace, go)
    layers = [
        (g.T @ trace.activations[i], g.sum(axis=0)) for i, g in enumerate(pre_grads)
    ]
    return MlpParams(layers), (gin[0] if squeeze else gin)


def input_gradient(params, x):
    """Gradient of a scalar-output network w.r.t. its input, per row."""
    if params.sizes[-1] != 1:
        raise InvalidArgument("input_gradient needs a scalar-output network")
    out, trace = forward(params, x)
    ones = np.ones((trace.activations[0].shape[0], 1))
    _, gin = _backward_preacts(params, trace, ones)
    return gin[0] if np.ndim(x) == 1 else gin


def r1_penalty_grad(params, x):
    """Penalty ``0.5 * ||grad_x D(x)||^2`` and its parameter gradient.

    For a batch the penalty and gradient are means over rows. The ReLU
    pattern is held fixed (exact away from kinks), which makes the input
    gradient independent of the biases.
    """
    if params.sizes[-1] != 1:
        raise InvalidArgument("the R1 penalty needs a scalar-output network")
    x, _ = _as_batch(params, x)
    n = x.shape[0]
    _, trace = forward(params, x)
    pre_grads, g = _backward_preacts(params, trace, np.ones((n, 1)))
    penalty = 0.5 * float(np.mean(np.sum(g * g, axis=1)))

    # Tangent pass: directional derivative of each activation along g.
    tangents = [g]
    t = g
    for i, (w, _) in enumerate(params.layers[:-1]):
        t = (t @ w.T) * (trace.preacts[i] > 0.0)
        tangents.append(t)
    layers = [
        (u.T @ tangents[i] / n, np.zeros(u.shape[1])) for i, u in enumerate(pre_grads)
    ]
    return penalty, MlpParams(layers)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(arrays, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
    """Fresh Adam state for a list of arrays (or an ``MlpParams``)."""
    if isinstance(arrays, MlpParams):
        arrays = arrays.arrays()
    return AdamState(
        m=[np.zeros_like(a, dtype=np.float64) for a in arrays],
        v=[np.zeros_like(a, dtype=np.float64) for a in arrays],
        lr=float(lr),
        beta1=float(betas[0]),
        beta2=float(betas[1]),
        eps=float(eps),
    )


def adam_step(state, params, grads):
    """One bias-corrected Adam descent step.

    ``params`` and ``grads`` are both ``MlpParams`` or both lists of
    arrays. Returns ``(new_state, new_params)``; inputs are not mutated.
    """
    wrap = isinstance(params, MlpParams)
    p_arrs = params.arrays() if wrap else list(params)
    g_arrs = grads.arrays() if isinstance(grads, MlpParams) else list(grads)
    if len(p_arrs) != len(g_arrs) or len(p_arrs) != len(state.m):
        raise InvalidArgument("parameter, gradient and state layouts differ")
    t = state.t + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(p_arrs, g_arrs, state.m, state.v):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(m):
            raise InvalidArgument(f"shape mismatch: param {np.shape(p)} vs grad {np.shape(g)}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_p.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.eps)
    return new_state, (MlpParams.from_arrays(new_p) if wrap else new_p)


def save_params(params, path):
    """Write a little-endian binary checkpoint."""
    sizes = params.sizes
    header = _MAGIC + struct.pack("<II", _VERSION, len(params.layers))
    header += struct.pack(f"<{len(sizes)}I", *sizes)
    with open(path, "wb") as fh:
        fh.write(header)
        for w, b in params.layers:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_params(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise InvalidArgument("not a parameter checkpoint (bad magic)")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise InvalidArgument(f"unsupported checkpoint version {version}")
    off = 12
    sizes = struct.unpack_from(f"<{n_layers + 1}I", data, off)
    off += 4 * (n_layers + 1)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=off).reshape(fan_out, fan_in)
        off += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        layers.append((w.astype(np.float64), b.astype(np.float64)))
    if off != len(data):
        raise InvalidArgument("checkpoint has trailing bytes")
    return MlpParams(layers)
