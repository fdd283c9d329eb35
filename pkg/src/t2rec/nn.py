"""Dense feed-forward networks with hand-written reverse-mode gradients.

Layers follow the ``h_l(x) = act(A_l x + b_l)`` convention with a linear last
layer. Inputs may be a single vector of shape ``(D,)`` or a batch ``(N, D)``;
a batched backward pass returns gradients summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

Activation = Literal["relu", "sigmoid"]
ACTIVATIONS = ("relu", "sigmoid")
FORMAT_VERSION = 1


@dataclass
class LayerParams:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64, ndmin=2)
        self.bias = np.array(self.bias, dtype=np.float64, ndmin=1)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ValueError("weights must be 2-D and bias 1-D")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError(
                f"weights have {self.weights.shape[0]} rows but bias has length {self.bias.shape[0]}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("layer parameters must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def copy(self) -> LayerParams:
        return LayerParams(self.weights.copy(), self.bias.copy())


@dataclass
class Mlp:
    layers: list[LayerParams]
    activation: Activation = "relu"

    def __post_init__(self):
        if len(self.layers) == 0:
            raise ValueError("an Mlp needs at least one layer")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        for l in range(1, len(self.layers)):
            if self.layers[l].shape[1] != self.layers[l - 1].shape[0]:
                raise ValueError(
                    f"layer {l} expects input width {self.layers[l].shape[1]}, "
                    f"previous layer outputs {self.layers[l - 1].shape[0]}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        """[input, hidden..., output] widths."""
        return [self.input_dim] + [layer.shape[0] for layer in self.layers]

    def copy(self) -> Mlp:
        return Mlp([layer.copy() for layer in self.layers], self.activation)

    def scaled(self, c: float) -> Mlp:
        return Mlp([LayerParams(c * p.weights, c * p.bias) for p in self.layers], self.activation)

    def __call__(self, x):
        return forward(self, x)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "activation": self.activation,
            "layers": [
                {
                    "rows": int(p.shape[0]),
                    "cols": int(p.shape[1]),
                    "weights": [float(v) for v in p.weights.ravel()],
                    "bias": [float(v) for v in p.bias],
                }
                for p in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Mlp:
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported Mlp format_version {version!r}")
        layers = []
        for entry in doc["layers"]:
            w = np.asarray(entry["weights"], dtype=np.float64)
            if w.size != entry["rows"] * entry["cols"]:
                raise ValueError("weights length does not match rows*cols")
            layers.append(LayerParams(w.reshape(entry["rows"], entry["cols"]), entry["bias"]))
        return cls(layers, doc["activation"])


def activations(kind: Activation, x):
    """Element-wise ReLU ``max(x, 0)`` or logistic sigmoid."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        # tanh form avoids overflow in exp for large |x|
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    raise ValueError(f"unknown activation {kind!r}")


def _activation_grad(kind: Activation, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if kind == "relu":
        # subgradient 0 at z == 0
        return (z > 0.0).astype(np.float64)
    return a * (1.0 - a)


def _as_batch(net: Mlp, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"expected input width {net.input_dim}, got shape {x.shape}")
    return x, single


def forward_cache(net: Mlp, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Layer inputs (plus the final output) and pre-activations for a 2-D batch."""
    inputs, pre = [], []
    h = x
    last = len(net.layers) - 1
    for l, p in enumerate(net.layers):
        inputs.append(h)
        z = h @ p.weights.T + p.bias
        pre.append(z)
        h = z if l == last else activations(net.activation, z)
    inputs.append(h)
    return inputs, pre


def forward(net: Mlp, x) -> np.ndarray:
    x, single = _as_batch(net, x)
    out = forward_cache(net, x)[0][-1]
    return out[0] if single else out


def backward(net: Mlp, x, upstream) -> list[LayerParams]:
    """Gradient of ``<upstream, f(x)>`` with respect to every layer's parameters.

    For batched ``x`` the upstream has shape ``(N, out)`` and the result is the
    sum of the per-row gradients.
    """
    x, single = _as_batch(net, x)
    g = np.asarray(upstream, dtype=np.float64)
    if single:
        g = g[None, :]
    if g.shape != (x.shape[0], net.output_dim):
        raise ValueError(f"upstream shape {g.shape} does not match output {(x.shape[0], net.output_dim)}")
    grads = backward_arrays(net, forward_cache(net, x), g)
    return [LayerParams(dw, db) for dw, db in grads]


def backward_arrays(net: Mlp, cache, upstream: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Unvalidated reverse pass over a ``forward_cache`` result.

    ``upstream`` is ``(N, out)``; returns ``(dW, db)`` per layer.
    """
    inputs, pre = cache
    grads: list = [None] * len(net.layers)
    delta = upstream
    for l in range(len(net.layers) - 1, -1, -1):
        if l != len(net.layers) - 1:
            delta = delta * _activation_grad(net.activation, pre[l], inputs[l + 1])
        grads[l] = (delta.T @ inputs[l], delta.sum(axis=0))
        if l > 0:
            delta = delta @ net.layers[l].weights
    return grads


@dataclass(frozen=True)
class ArchStats:
    depth: int
    effective_params: int
    param_scale: float
    output_bound: float = field(default=float("nan"))


def arch_stats(net: Mlp, output_bound: float = float("nan")) -> ArchStats:
    """Depth U(f), nonzero count Z(f) and parameter scale D(f).

    ``output_bound`` is carried through unchanged; it is the ``2M`` cap of the
    analysed function class and is never enforced here.
    """
    nnz = sum(int(np.count_nonzero(p.weights)) + int(np.count_nonzero(p.bias)) for p in net.layers)
    scale = max(
        max(np.max(np.abs(p.weights), initial=0.0), np.max(np.abs(p.bias), initial=0.0))
        for p in net.layers
    )
    return ArchStats(net.depth, nnz, float(scale), output_bound)


def init_mlp(
    widths: Sequence[int],
    activation: Activation = "relu",
    rng: np.random.Generator | int | None = None,
) -> Mlp:
    """Glorot-uniform weights and zero biases for ``widths = [in, h1, ..., out]``."""
    rng = np.random.default_rng(rng)
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(LayerParams(rng.uniform(-limit, limit, size=(fan_out, fan_in)), np.zeros(fan_out)))
    return Mlp(layers, activation)


def flatten_params(net: Mlp) -> np.ndarray:
    return np.concatenate([np.concatenate([p.weights.ravel(), p.bias]) for p in net.layers])


def unflatten_params(net: Mlp, theta: np.ndarray) -> Mlp:
    """A copy of ``net`` with parameters replaced by the flat vector ``theta``."""
    layers, pos = [], 0
    for p in net.layers:
        r, c = p.shape
        w = theta[pos : pos + r * c].reshape(r, c)
        pos += r * c
        b = theta[pos : pos + r]
        pos += r
        layers.append(LayerParams(w.copy(), b.copy()))
    if pos != theta.size:
        raise ValueError("parameter vector length does not match the network")
    return Mlp(layers, net.activation)


def flatten_grads(grads: Sequence[LayerParams]) -> np.ndarray:
    return np.concatenate([np.concatenate([g.weights.ravel(), g.bias]) for g in grads])
