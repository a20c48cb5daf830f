"""Network parameters, jet evaluation wrappers, and checkpoint I/O.

The parameter pytree is a plain list of (weight, bias) pairs.  The flat
vector ordering is fixed and load-bearing (checkpoints, optimizers, the
finite-difference tests): layers in order, each weight matrix row-major,
then its bias.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass
class NetworkParams:
    """Fully-connected scalar network, tanh hidden layers, affine output."""

    layer_sizes: tuple
    weights: list
    biases: list

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_params(layer_sizes, rng, dtype=np.float64):
    """Glorot-normal weights (std sqrt(2/(fan_in+fan_out))), zero biases.

    rng is a np.random.Generator; the draw order is fixed, so equal seeds
    give bit-identical parameters.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    dtype = np.dtype(dtype)
    weights, biases = [], []
    for w_in, w_out in zip(sizes[:-1], sizes[1:]):
        std = np.sqrt(2.0 / (w_in + w_out))
        w = rng.normal(0.0, std, size=(w_out, w_in))
        weights.append(w.astype(dtype))
        biases.append(np.zeros(w_out, dtype))
    return NetworkParams(sizes, weights, biases)


def flatten(params):
    """Concatenate all parameters into one vector (copies)."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unflatten(layer_sizes, theta):
    """Rebuild a NetworkParams whose arrays are views into theta."""
    sizes = tuple(int(s) for s in layer_sizes)
    layout, nparam = kernels.param_layout(sizes)
    if theta.shape != (nparam,):
        raise ValueError(f"expected {nparam} parameters, got {theta.shape}")
    weights, biases = [], []
    for (w_sl, b_sl), (w_in, w_out) in zip(layout, zip(sizes[:-1], sizes[1:])):
        weights.append(theta[w_sl].reshape(w_out, w_in))
        biases.append(theta[b_sl])
    return NetworkParams(sizes, weights, biases)


def forward(params, x):
    """Batch of network values, shape (n,)."""
    ws = kernels.JetWorkspace(params.layer_sizes, len(x), 0, params.dtype)
    v, _, _ = kernels.jet_forward(ws, params.weights, params.biases, x)
    return v.copy()


def forward_jet(params, x, order=2):
    """Values, gradients (d, n) and second derivatives (d, n) in one pass."""
    ws = kernels.JetWorkspace(params.layer_sizes, len(x), order, params.dtype)
    v, g, h = kernels.jet_forward(ws, params.weights, params.biases, x)
    return (v.copy(), None if g is None else g.copy(),
            None if h is None else h.copy())


def vjp_jet(params, x, wv, wg=None, wh=None):
    """Gradient wrt parameters of sum_n (wv v + wg.g + wh.h), flat."""
    order = 2 if wh is not None else (1 if wg is not None else 0)
    ws = kernels.JetWorkspace(params.layer_sizes, len(x), order, params.dtype)
    kernels.jet_forward(ws, params.weights, params.biases, x)
    return kernels.jet_backward(ws, params.weights, params.biases, wv, wg, wh)


def save_checkpoint(path, params, config):
    """Write layer sizes, the flat parameter vector, and a config dict."""
    np.savez(
        path,
        layer_sizes=np.asarray(params.layer_sizes, np.int64),
        theta=flatten(params),
        dtype=np.str_(params.dtype.name),
        config=np.str_(json.dumps(config, sort_keys=True)),
    )


def load_checkpoint(path):
    """Read back (params, config)."""
    with np.load(path) as z:
        sizes = tuple(int(s) for s in z["layer_sizes"])
        dtype = np.dtype(str(z["dtype"]))
        theta = np.ascontiguousarray(z["theta"], dtype)
        config = json.loads(str(z["config"]))
    params = unflatten(sizes, theta)
    return params, config
