"""Dense feedforward networks with hand-written gradients.

Plain-numpy building blocks shared by the client extractors, the shared
classifier, and the input-reconstruction attack: fully connected layers with
relu or identity activations, a max-shifted soft-label cross-entropy, exact
analytic gradients, and vanilla SGD.

Networks are value-like: training code never mutates parameters in place, it
builds updated copies via ``sgd_step``. The only mutable slot is the forward
cache consumed by ``backward``.
"""

from dataclasses import dataclass, field

import numpy as np

RELU = "relu"
IDENTITY = "identity"
ACTIVATIONS = (RELU, IDENTITY)

SIMPLEX_ATOL = 1e-9


class ShapeError(ValueError):
    """Array dimensions do not line up."""


class StaleCacheError(RuntimeError):
    """backward() was called without a matching forward() cache."""


class DivergedError(RuntimeError):
    """A loss, gradient, or parameter turned non-finite during training."""


def one_hot(label, num_classes):
    if not 0 <= int(label) < num_classes:
        raise ValueError(f"label {label} outside [0, {num_classes})")
    v = np.zeros(num_classes)
    v[int(label)] = 1.0
    return v


def one_hot_matrix(labels, num_classes):
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError("labels outside category range")
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def check_label_encoding(probs, num_classes=None):
    """Validate a probability vector over categories; returns it as float64."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1:
        raise ShapeError("label encoding must be a 1-d vector")
    if num_classes is not None and p.shape[0] != num_classes:
        raise ShapeError(
            f"label encoding has {p.shape[0]} entries, expected {num_classes}"
        )
    if not np.isfinite(p).all():
        raise ValueError("label encoding must be finite")
    if p.min() < -SIMPLEX_ATOL or p.max() > 1.0 + SIMPLEX_ATOL:
        raise ValueError("label encoding entries must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"label encoding sums to {p.sum()!r}, expected 1.0")
    return p


@dataclass(eq=False)
class Layer:
    weight: np.ndarray  # (fan_out, fan_in)
    bias: np.ndarray  # (fan_out,)
    activation: str = RELU

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("layer needs a 2-d weight matrix and a 1-d bias")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"bias has {self.bias.shape[0]} entries for "
                f"{self.weight.shape[0]} output units"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.weight).all() and np.isfinite(self.bias).all()):
            raise ValueError("layer parameters must be finite")

    @property
    def fan_in(self):
        return self.weight.shape[1]

    @property
    def fan_out(self):
        return self.weight.shape[0]


@dataclass(eq=False)
class BatchCache:
    """Everything forward saw, kept for the matching backward pass."""

    inputs: np.ndarray  # (n, input_dim)
    pre_activations: list  # z per layer, each (n, fan_out)
    layer_inputs: list  # input to each layer; layer_inputs[0] is inputs


@dataclass(eq=False)
class DenseNet:
    layers: list
    cache: BatchCache | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a net needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.fan_in != prev.fan_out:
                raise ShapeError(
                    f"layer expects {nxt.fan_in} inputs but previous layer "
                    f"emits {prev.fan_out}"
                )

    @property
    def input_dim(self):
        return self.layers[0].fan_in

    @property
    def output_dim(self):
        return self.layers[-1].fan_out


def init_dense(sizes, activations, rng):
    """Build a DenseNet with Glorot-uniform weights and zero biases.

    sizes is [input_dim, h1, ..., output_dim]; activations has one entry per
    layer. Weights are drawn uniformly in +-sqrt(6/(fan_in+fan_out)).
    """
    if len(sizes) < 2:
        raise ValueError("need an input and an output size")
    if len(activations) != len(sizes) - 1:
        raise ValueError("one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return DenseNet(layers)


def clone_net(net):
    layers = [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in net.layers]
    return DenseNet(layers)


def _apply_activation(z, activation):
    if activation == RELU:
        return np.maximum(z, 0.0)
    return z


def forward_pass(net, X):
    """Run a batch through the net. Returns (outputs, cache).

    Pure with respect to the net: does not touch net.cache.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ShapeError(
            f"input batch has shape {X.shape}, expected (n, {net.input_dim})"
        )
    if not np.isfinite(X).all():
        raise ValueError("inputs must be finite")
    a = X
    pre, layer_inputs = [], []
    for layer in net.layers:
        layer_inputs.append(a)
        z = a @ layer.weight.T + layer.bias
        pre.append(z)
        a = _apply_activation(z, layer.activation)
    return a, BatchCache(X, pre, layer_inputs)


def forward(net, x):
    """Single-sample forward pass; caches pre-activations on the net."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("forward takes a 1-d input vector")
    out, cache = forward_pass(net, x[None, :])
    net.cache = cache
    return out[0]


@dataclass(eq=False)
class GradientSet:
    weight_grads: list
    bias_grads: list

    def matches(self, net):
        if len(self.weight_grads) != len(net.layers):
            return False
        return all(
            gw.shape == l.weight.shape and gb.shape == l.bias.shape
            for gw, gb, l in zip(self.weight_grads, self.bias_grads, net.layers)
        )

    def all_finite(self):
        return all(np.isfinite(g).all() for g in self.weight_grads) and all(
            np.isfinite(g).all() for g in self.bias_grads
        )


def backprop(net, cache, grad_output):
    """Backpropagate d(loss)/d(output) through the net.

    Returns (GradientSet, d(loss)/d(input)). grad_output and the returned
    input gradient are batches, one row per sample in the cached forward.
    """
    delta = np.asarray(grad_output, dtype=float)
    n = cache.inputs.shape[0]
    if delta.shape != (n, net.output_dim):
        raise ShapeError(
            f"grad_output has shape {delta.shape}, expected ({n}, {net.output_dim})"
        )
    weight_grads = [None] * len(net.layers)
    bias_grads = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        if layer.activation == RELU:
            delta = delta * (cache.pre_activations[i] > 0)
        weight_grads[i] = delta.T @ cache.layer_inputs[i]
        bias_grads[i] = delta.sum(axis=0)
        delta = delta @ layer.weight
    return GradientSet(weight_grads, bias_grads), delta


def softmax(logits):
    z = np.asarray(logits, dtype=float)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def soft_cross_entropy(logits, target):
    """Cross-entropy -sum(target * log softmax(logits)), max-shifted."""
    z = np.asarray(logits, dtype=float)
    if z.ndim != 1:
        raise ShapeError("logits must be a 1-d vector")
    t = check_label_encoding(target, num_classes=z.shape[0])
    m = float(z.max())
    lse = m + np.log(np.exp(z - m).sum())
    return max(float(lse - t @ z), 0.0)


def batch_mean_ce(logits, targets):
    """Mean soft cross-entropy over a batch of logits rows."""
    z = np.asarray(logits, dtype=float)
    t = np.asarray(targets, dtype=float)
    if z.shape != t.shape:
        raise ShapeError("logits and targets must have matching shapes")
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    losses = lse - (t * z).sum(axis=1)
    return float(np.maximum(losses, 0.0).mean())


def ce_grad(logits, targets):
    """Gradient of batch_mean_ce with respect to the logits."""
    z = np.asarray(logits, dtype=float)
    t = np.asarray(targets, dtype=float)
    return (softmax(z) - t) / z.shape[0]


def backward(net, x, target):
    """Gradients of soft_cross_entropy(net(x), target) for all parameters.

    Requires the cache left by the immediately preceding forward(net, x).
    """
    x = np.asarray(x, dtype=float)
    cache = net.cache
    if (
        cache is None
        or cache.inputs.shape != (1, net.input_dim)
        or not np.array_equal(cache.inputs[0], x)
    ):
        raise StaleCacheError("backward needs a fresh forward cache for this input")
    logits = _apply_activation(
        cache.pre_activations[-1], net.layers[-1].activation
    )[0]
    t = check_label_encoding(target, num_classes=net.output_dim)
    grad_out = (softmax(logits) - t)[None, :]
    grads, _ = backprop(net, cache, grad_out)
    return grads


def ce_value_and_grads(net, X, targets):
    """Mean cross-entropy over a batch plus its parameter gradients."""
    out, cache = forward_pass(net, X)
    loss = batch_mean_ce(out, targets)
    grads, _ = backprop(net, cache, ce_grad(out, targets))
    return loss, grads


def sgd_step(net, grads, lr):
    """One vanilla SGD update; returns a new net, leaves the input untouched."""
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    if not grads.matches(net):
        raise ShapeError("gradient shapes do not match the net")
    if not grads.all_finite():
        raise DivergedError("non-finite gradients; training diverged")
    layers = [
        Layer(l.weight - lr * gw, l.bias - lr * gb, l.activation)
        for l, gw, gb in zip(net.layers, grads.weight_grads, grads.bias_grads)
    ]
    return DenseNet(layers)
