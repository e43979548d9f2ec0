"""Small fully connected Q-network in plain numpy: forward, backprop, Adam."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


@dataclass
class QNetworkParams:
    """Weights ``W[k]`` of shape (fan_in, fan_out) and biases ``b[k]``."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def input_width(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "QNetworkParams":
        return QNetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> List[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def to_npz_dict(self) -> dict:
        out = {}
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{k}"] = w
            out[f"b{k}"] = b
        return out

    @classmethod
    def from_npz_dict(cls, data) -> "QNetworkParams":
        n = sum(1 for key in data.keys() if key.startswith("W"))
        return cls([np.array(data[f"W{k}"]) for k in range(n)], [np.array(data[f"b{k}"]) for k in range(n)])

    def allclose(self, other: "QNetworkParams", atol: float = 0.0) -> bool:
        return len(self.weights) == len(other.weights) and all(
            a.shape == b.shape and np.allclose(a, b, rtol=0.0, atol=atol)
            for a, b in zip(self.arrays(), other.arrays())
        )


def init_params(sizes: Sequence[int], rng: np.random.Generator) -> QNetworkParams:
    """He-uniform weights for the ReLU layers, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QNetworkParams(weights, biases)


def q_forward(params: QNetworkParams, x: np.ndarray, keep: bool = False):
    """Q-values for a batch ``x`` of shape (n, input_width).

    With ``keep`` the layer activations are returned too, for backprop.
    """
    x = np.atleast_2d(x)
    if x.shape[1] != params.input_width:
        raise ValueError(f"input width {x.shape[1]} does not match network input {params.input_width}")
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return (h, acts) if keep else h


def greedy_action(params: QNetworkParams, obs: np.ndarray) -> int:
    """argmax_a Q(s, a); ties go to the lowest index."""
    q = q_forward(params, obs)[0]
    return int(np.argmax(q))


def huber(x: np.ndarray, delta: float = 1.0) -> np.ndarray:
    ax = np.abs(x)
    return np.where(ax <= delta, 0.5 * x * x, delta * (ax - 0.5 * delta))


def huber_grad(x: np.ndarray, delta: float = 1.0) -> np.ndarray:
    return np.clip(x, -delta, delta)


def loss_and_grads(
    params: QNetworkParams,
    obs: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray | None = None,
    delta: float = 1.0,
):
    """Importance-weighted mean Huber loss on Q(s, a) - target.

    Returns (loss, grads as a QNetworkParams, td errors).
    """
    n = obs.shape[0]
    if weights is None:
        weights = np.ones(n)
    q, acts = q_forward(params, obs, keep=True)
    rows = np.arange(n)
    td = q[rows, actions] - targets
    loss = float(np.mean(weights * huber(td, delta)))

    grad_out = np.zeros_like(q)
    grad_out[rows, actions] = weights * huber_grad(td, delta) / n
    gw, gb = [None] * len(params.weights), [None] * len(params.weights)
    g = grad_out
    for k in range(len(params.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ g
        gb[k] = g.sum(axis=0)
        if k:
            g = (g @ params.weights[k].T) * (acts[k] > 0)
    return loss, QNetworkParams(gw, gb), td


@dataclass
class Adam:
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: QNetworkParams, grads: QNetworkParams) -> None:
        """In-place update of ``params``."""
        p_arrays, g_arrays = params.arrays(), grads.arrays()
        if not self.m:
            self.m = [np.zeros_like(a) for a in p_arrays]
            self.v = [np.zeros_like(a) for a in p_arrays]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(p_arrays, g_arrays, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        out = {"adam_t": np.array(self.t)}
        for k, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"adam_m{k}"] = m
            out[f"adam_v{k}"] = v
        return out
