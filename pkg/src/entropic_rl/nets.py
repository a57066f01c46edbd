"""Dense feed-forward nets with manual forward/backward passes.

Rectifier hidden layers, identity output, 64-bit parameters. The backward
pass returns gradients w.r.t. parameters and w.r.t. the input vector; the
input-gradient path is what actor updates differentiate through.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class ShapeMismatchError(ValueError):
    pass


@dataclass
class DenseNet:
    """Parameter container: weights[i] has shape (fan_in, fan_out)."""

    sizes: tuple
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    @classmethod
    def init(cls, sizes, rng: np.random.Generator) -> "DenseNet":
        """Uniform +-sqrt(1/fan_in) init; keeps initial outputs near zero."""
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(1.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(sizes=tuple(sizes), weights=weights, biases=biases)

    @classmethod
    def zeros(cls, sizes) -> "DenseNet":
        weights = [np.zeros((i, o)) for i, o in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(o) for o in sizes[1:]]
        return cls(sizes=tuple(sizes), weights=weights, biases=biases)

    @property
    def params(self) -> list:
        return self.weights + self.biases

    def set_params(self, params: list) -> None:
        n = len(self.weights)
        self.weights = [np.asarray(p, dtype=np.float64) for p in params[:n]]
        self.biases = [np.asarray(p, dtype=np.float64) for p in params[n:]]

    def copy(self) -> "DenseNet":
        return DenseNet(sizes=self.sizes,
                        weights=[w.copy() for w in self.weights],
                        biases=[b.copy() for b in self.biases])


def forward(net: DenseNet, x: np.ndarray):
    """Returns (output, cache). ``x`` may be (d,) or batched (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != net.sizes[0]:
        raise ShapeMismatchError(f"input width {h.shape[1]} != {net.sizes[0]}")
    activations = [h]
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        # Rectifier subgradient at exactly 0 is 0 (z > 0 strictly).
        h = np.maximum(z, 0.0) if i < n_layers - 1 else z
        activations.append(h)
    out = activations[-1]
    return (out[0] if squeeze else out), activations


def backward(net: DenseNet, cache: list, grad_out: np.ndarray):
    """Gradients of sum_i <grad_out_i, out_i> w.r.t. params and input."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    squeeze = grad_out.ndim == 1
    g = grad_out[None, :] if squeeze else grad_out
    if g.shape[-1] != net.sizes[-1]:
        raise ShapeMismatchError(f"grad width {g.shape[-1]} != {net.sizes[-1]}")
    w_grads = [None] * len(net.weights)
    b_grads = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        h_in = cache[i]
        if i < len(net.weights) - 1:
            g = g * (cache[i + 1] > 0.0)
        w_grads[i] = h_in.T @ g
        b_grads[i] = g.sum(axis=0)
        g = g @ net.weights[i].T
    input_grad = g[0] if squeeze else g
    return w_grads + b_grads, input_grad


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr: float = 3e-4, **kw) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **kw)


def adam_step(state: AdamState, params: list, grads: list) -> list:
    """One Adam update; returns the updated parameter list."""
    if len(params) != len(state.m):
        raise ShapeMismatchError("optimizer state does not match parameters")
    state.step += 1
    t = state.step
    out = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        out.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out


def soft_update(target_params: list, online_params: list, tau: float) -> list:
    """Exponential moving average: theta' <- tau*theta + (1-tau)*theta'."""
    return [tau * o + (1.0 - tau) * t for t, o in zip(target_params, online_params)]


def save_params(net: DenseNet, path: str) -> None:
    """Flat binary vector with a JSON shape header."""
    header = json.dumps({"sizes": list(net.sizes)}).encode()
    flat = np.concatenate([p.ravel() for p in net.params])
    with open(path, "wb") as fh:
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        fh.write(flat.tobytes())


def load_params(path: str) -> DenseNet:
    with open(path, "rb") as fh:
        n = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(n))
        flat = np.frombuffer(fh.read(), dtype=np.float64)
    net = DenseNet.zeros(header["sizes"])
    offset = 0
    params = []
    for p in net.params:
        params.append(flat[offset:offset + p.size].reshape(p.shape).copy())
        offset += p.size
    net.set_params(params)
    return net
