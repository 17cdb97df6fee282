"""Minimal dense-network engine: forward, backprop, SGD with momentum and weight decay.

All computation is float64. Layers are plain weight/bias pairs with either a
ReLU or an identity activation; every network ends in an identity layer so the
output is an unbounded real score.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when an input or gradient does not match the network's shapes."""


class StaleCacheError(ValueError):
    """Raised when a forward cache is replayed against the wrong network."""


class Activation(Enum):
    RELU = "relu"
    IDENTITY = "identity"


@dataclass
class DenseLayer:
    """One fully connected layer: y = act(W x + b), W is (out_dim, in_dim)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: Activation

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"layer weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match out_dim {self.weights.shape[0]}"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Network:
    """Stack of dense layers; hidden layers use ReLU, the final layer is linear."""

    layers: list[DenseLayer]
    input_dim: int

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("network needs at least one layer")
        expected = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.in_dim != expected:
                raise ShapeError(
                    f"layer {i} expects input dim {layer.in_dim}, got {expected} from upstream"
                )
            expected = layer.out_dim
        for i, layer in enumerate(self.layers[:-1]):
            if layer.activation is not Activation.RELU:
                raise ShapeError(f"hidden layer {i} must use ReLU")
        if self.layers[-1].activation is not Activation.IDENTITY:
            raise ShapeError("final layer must use the identity activation")

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    def parameter_count(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def copy(self) -> "Network":
        layers = [
            DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers
        ]
        return Network(layers, self.input_dim)

    def all_finite(self) -> bool:
        return all(
            np.isfinite(l.weights).all() and np.isfinite(l.bias).all() for l in self.layers
        )


@dataclass
class OptimizerConfig:
    """SGD hyperparameters; the defaults are the standard training recipe."""

    learning_rate: float = 0.001
    batch_size: int = 100
    weight_decay: float = 0.0005
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class GradientSet:
    """Per-layer parameter gradients, plus the gradient w.r.t. the network input."""

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    input_grad: np.ndarray | None = None

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet(
            [g * factor for g in self.weight_grads],
            [g * factor for g in self.bias_grads],
            None if self.input_grad is None else self.input_grad * factor,
        )


@dataclass
class ForwardCache:
    """Intermediate activations from one forward pass, consumed by backprop."""

    owner: Network
    x: np.ndarray          # (B, in_dim)
    pre: list[np.ndarray]  # per layer, pre-activation (B, out_dim)
    post: list[np.ndarray]
    single: bool           # input was a bare vector


@dataclass
class MomentumState:
    """Velocity buffers matching a network's parameter shapes."""

    weight_vel: list[np.ndarray] = field(default_factory=list)
    bias_vel: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, net: Network) -> "MomentumState":
        return cls(
            [np.zeros_like(l.weights) for l in net.layers],
            [np.zeros_like(l.bias) for l in net.layers],
        )


def build_network(layer_dims: Sequence[int], seed: int) -> Network:
    """Build a network with the given dim chain, e.g. [128, 512, 512, 1].

    Hidden layers get He-scaled Gaussian weights (std sqrt(2/in_dim)); the
    final linear layer uses std sqrt(1/in_dim). Biases start at zero.
    """
    dims = list(layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ShapeError(f"layer dims must be >= 2 positive entries, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    n_layers = len(dims) - 1
    for i in range(n_layers):
        in_dim, out_dim = dims[i], dims[i + 1]
        last = i == n_layers - 1
        std = np.sqrt(1.0 / in_dim) if last else np.sqrt(2.0 / in_dim)
        weights = rng.standard_normal((out_dim, in_dim)) * std
        activation = Activation.IDENTITY if last else Activation.RELU
        layers.append(DenseLayer(weights, np.zeros(out_dim), activation))
    return Network(layers, dims[0])


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a vector (in_dim,) or batch (B, in_dim).

    Returns the output (matching the input's rank) and a cache for backprop.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(
            f"input has trailing dim {x.shape[-1] if x.ndim else 0}, "
            f"network expects {net.input_dim}"
        )
    h = x
    pre, post = [], []
    for layer in net.layers:
        z = h @ layer.weights.T + layer.bias
        h = np.maximum(z, 0.0) if layer.activation is Activation.RELU else z
        pre.append(z)
        post.append(h)
    cache = ForwardCache(owner=net, x=x, pre=pre, post=post, single=single)
    out = post[-1][0] if single else post[-1]
    return out, cache


def backprop(net: Network, cache: ForwardCache, upstream_grad: np.ndarray) -> GradientSet:
    """Exact gradients of (output . upstream_grad) w.r.t. all parameters.

    For a batch cache the dot product is summed over the batch, so callers
    wanting a mean loss gradient should pre-scale upstream_grad by 1/B.
    Also fills ``input_grad``, the gradient w.r.t. the network input.
    """
    if cache.owner is not net:
        raise StaleCacheError("cache was produced by a different network")
    if len(cache.pre) != len(net.layers) or any(
        p.shape[1] != l.out_dim for p, l in zip(cache.pre, net.layers)
    ):
        raise StaleCacheError("cache shapes do not match the network")
    upstream = np.asarray(upstream_grad, dtype=np.float64)
    if cache.single and upstream.ndim == 1:
        upstream = upstream[None, :]
    if upstream.shape != cache.post[-1].shape:
        raise ShapeError(
            f"upstream grad shape {upstream.shape} does not match output "
            f"shape {cache.post[-1].shape}"
        )

    weight_grads: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    bias_grads: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    delta = upstream
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        if layer.activation is Activation.RELU:
            delta = delta * (cache.pre[i] > 0)
        h_in = cache.x if i == 0 else cache.post[i - 1]
        weight_grads[i] = delta.T @ h_in
        bias_grads[i] = delta.sum(axis=0)
        delta = delta @ layer.weights
    input_grad = delta[0] if cache.single else delta
    return GradientSet(weight_grads, bias_grads, input_grad)


def sgd_step(
    net: Network, grads: GradientSet, state: MomentumState, cfg: OptimizerConfig
) -> Network:
    """One SGD update with momentum and L2 weight decay, in place.

    v <- momentum * v - lr * (grad + weight_decay * param); param <- param + v.
    """
    if len(grads.weight_grads) != len(net.layers):
        raise ShapeError("gradient set does not match network layer count")
    for i, layer in enumerate(net.layers):
        gw, gb = grads.weight_grads[i], grads.bias_grads[i]
        if gw.shape != layer.weights.shape or gb.shape != layer.bias.shape:
            raise ShapeError(f"gradient shapes for layer {i} do not match parameters")
        vw = state.weight_vel[i]
        vb = state.bias_vel[i]
        vw *= cfg.momentum
        vw -= cfg.learning_rate * (gw + cfg.weight_decay * layer.weights)
        vb *= cfg.momentum
        vb -= cfg.learning_rate * (gb + cfg.weight_decay * layer.bias)
        layer.weights += vw
        layer.bias += vb
    return net


def grad_check(net: Network, x: np.ndarray, epsilon: float = 1e-6) -> float:
    """Max relative error between backprop and central finite differences.

    The checked scalar is sum(output). Relative error per parameter is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-12). Returns NaN
    (with a warning) if the network holds non-finite parameters.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if not net.all_finite():
        warnings.warn("grad_check: network has non-finite parameters", RuntimeWarning)
        return float("nan")
    out, cache = forward(net, x)
    upstream = np.ones_like(np.atleast_1d(out))
    analytic = backprop(net, cache, upstream)

    worst = 0.0
    for li, layer in enumerate(net.layers):
        for arr, grad in ((layer.weights, analytic.weight_grads[li]),
                          (layer.bias, analytic.bias_grads[li])):
            flat = arr.ravel()
            gflat = grad.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + epsilon
                plus = float(np.sum(forward(net, x)[0]))
                flat[j] = orig - epsilon
                minus = float(np.sum(forward(net, x)[0]))
                flat[j] = orig
                numeric = (plus - minus) / (2.0 * epsilon)
                a = float(gflat[j])
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
                worst = max(worst, err)
    return worst
