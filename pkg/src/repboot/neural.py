"""Feedforward classifier: sigmoid hidden layers, softmax output, cross-entropy, Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_CLAMP = 1e-12


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(probs, grad_probs):
    """Gradient w.r.t. logits given the gradient w.r.t. softmax probabilities."""
    return probs * (grad_probs - (grad_probs * probs).sum(axis=-1, keepdims=True))


def default_hidden_widths(input_width: int, lvl_count: int, n_hidden: int = 2) -> tuple[int, ...]:
    """Geometric taper from ``input_width`` down to ``2 * lvl_count``."""
    end = 2 * lvl_count
    if input_width <= end:
        return (end,) * n_hidden
    ratio = end / input_width
    return tuple(max(end, int(round(input_width * ratio ** ((i + 1) / n_hidden))))
                 for i in range(n_hidden))


@dataclass(frozen=True)
class NetworkSpec:
    input_width: int
    hidden_widths: tuple[int, ...]
    output_width: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(h) for h in self.hidden_widths))
        if min((self.input_width, self.output_width) + self.hidden_widths) < 1:
            raise ValueError("all layer widths must be >= 1")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_width,) + self.hidden_widths + (self.output_width,)

    @property
    def n_params(self) -> int:
        w = self.widths
        return sum((a + 1) * b for a, b in zip(w[:-1], w[1:]))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


class Network:
    """Weights ``W[i]`` have shape ``(fan_in, fan_out)``; rows of the input are samples."""

    def __init__(self, spec: NetworkSpec, weights=None, biases=None):
        self.spec = spec
        w = spec.widths
        if weights is None:
            weights = [np.zeros((a, b)) for a, b in zip(w[:-1], w[1:])]
        if biases is None:
            biases = [np.zeros(b) for b in w[1:]]
        self.weights = [np.asarray(x, dtype=float) for x in weights]
        self.biases = [np.asarray(x, dtype=float) for x in biases]
        for W, B, a, b in zip(self.weights, self.biases, w[:-1], w[1:]):
            if W.shape != (a, b) or B.shape != (b,):
                raise ValueError("parameter shapes do not match the network spec")

    @classmethod
    def initialize(cls, spec: NetworkSpec, rng: np.random.Generator) -> "Network":
        w = spec.widths
        weights = []
        for a, b in zip(w[:-1], w[1:]):
            limit = np.sqrt(6.0 / (a + b))
            weights.append(rng.uniform(-limit, limit, size=(a, b)))
        return cls(spec, weights)

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, B in zip(self.weights, self.biases):
            out += [W, B]
        return out

    def copy(self) -> "Network":
        return Network(self.spec, [W.copy() for W in self.weights],
                       [B.copy() for B in self.biases])

    def forward(self, X, return_cache: bool = False):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.spec.input_width:
            raise ValueError(f"input width {X.shape[1]} != {self.spec.input_width}")
        acts = [X]
        for W, B in zip(self.weights[:-1], self.biases[:-1]):
            acts.append(sigmoid(acts[-1] @ W + B))
        logits = acts[-1] @ self.weights[-1] + self.biases[-1]
        probs = softmax(logits)
        if return_cache:
            return probs, (acts, logits, probs)
        return probs

    def backward(self, cache, grad_logits):
        """Parameter gradients (ordered like :attr:`params`) and the input gradient."""
        acts, _, _ = cache
        grads = [None] * (2 * len(self.weights))
        delta = grad_logits
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                a = acts[i]
                delta = delta * a * (1.0 - a)
        return grads, delta

    def to_dict(self) -> dict:
        return {
            "input_width": self.spec.input_width,
            "hidden_widths": list(self.spec.hidden_widths),
            "output_width": self.spec.output_width,
            "weights": [W.tolist() for W in self.weights],
            "biases": [B.tolist() for B in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Network":
        spec = NetworkSpec(data["input_width"], tuple(data["hidden_widths"]),
                           data["output_width"])
        return cls(spec, data["weights"], data["biases"])


def one_hot(levels, lvl_count: int) -> np.ndarray:
    levels = np.asarray(levels, dtype=int)
    Y = np.zeros((len(levels), lvl_count))
    Y[np.arange(len(levels)), levels - 1] = 1.0
    return Y


def cross_entropy(probs, Y) -> float:
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-(Y * np.log(p)).sum() / len(Y))


def forward(net: Network, F) -> np.ndarray:
    return net.forward(F)


def loss(net: Network, X, Y) -> float:
    """Mean categorical cross-entropy over the batch; ``Y`` is one-hot."""
    return cross_entropy(net.forward(X), Y)


def gradients(net: Network, X, Y) -> list[np.ndarray]:
    probs, cache = net.forward(X, return_cache=True)
    grads, _ = net.backward(cache, (probs - Y) / len(Y))
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], config: TrainConfig,
              state: AdamState) -> None:
    """In-place Adam update with bias-corrected moments."""
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)


@dataclass
class TrainResult:
    loss_trace: list[float] = field(default_factory=list)


def train_network(net: Network, X, levels, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Minibatch Adam on mean cross-entropy; returns the full-batch loss after each epoch."""
    X = np.asarray(X, dtype=float)
    Y = one_hot(levels, net.spec.output_width)
    rng = np.random.default_rng(config.seed)
    state = AdamState.zeros_like(net.params)
    result = TrainResult()
    n = len(X)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            adam_step(net.params, gradients(net, X[idx], Y[idx]), config, state)
        result.loss_trace.append(loss(net, X, Y))
    return result
