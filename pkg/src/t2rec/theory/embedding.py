"""Re-express a small ReLU network as a fixed-shape network of the same function.

The target shape has every hidden layer ``2W`` wide and exactly ``L`` layers.
Shallower nets are lengthened by splitting the output ``y`` into
``(relu(y), relu(-y))`` and carrying that pair forward unchanged, using
``relu(a) - relu(b)`` to recover ``y`` at the end.
"""

from __future__ import annotations

import numpy as np

from ..nn import LayerParams, Mlp, arch_stats


def _pad(weights: np.ndarray, bias: np.ndarray, rows: int, cols: int) -> LayerParams:
    w = np.zeros((rows, cols))
    b = np.zeros(rows)
    w[: weights.shape[0], : weights.shape[1]] = weights
    b[: bias.shape[0]] = bias
    return LayerParams(w, b)


def embed_network(net: Mlp, target_depth: int, width_cap: int) -> Mlp:
    if net.activation != "relu":
        raise ValueError("embedding needs ReLU: the sign-split identity fails for other activations")
    L, W = int(target_depth), int(width_cap)
    U = net.depth
    if U > L:
        raise ValueError(f"network depth {U} exceeds target depth {L}")
    if W < 1:
        raise ValueError("width_cap must be >= 1")
    nnz = arch_stats(net).effective_params
    if nnz > W:
        raise ValueError(f"network has {nnz} nonzero parameters, more than width_cap={W}")
    hidden = net.widths[1:-1]
    if any(h > 2 * W for h in hidden):
        raise ValueError("a hidden layer is wider than 2*width_cap")
    p = net.output_dim
    if U < L and p > W:
        raise ValueError("output width must be <= width_cap to fit the sign split")

    wide = 2 * W
    cols = net.input_dim
    layers: list[LayerParams] = []
    for lp in net.layers[:-1]:
        layers.append(_pad(lp.weights, lp.bias, wide, cols))
        cols = wide

    last = net.layers[-1]
    if U == L:
        layers.append(_pad(last.weights, last.bias, p, cols))
        return Mlp(layers, "relu")

    split_w = np.vstack([last.weights, -last.weights])
    split_b = np.concatenate([last.bias, -last.bias])
    layers.append(_pad(split_w, split_b, wide, cols))

    eye = np.eye(p)
    carry = np.block([[eye, -eye], [-eye, eye]])
    for _ in range(L - U - 1):
        layers.append(_pad(carry, np.zeros(2 * p), wide, wide))

    layers.append(_pad(np.hstack([eye, -eye]), np.zeros(p), p, wide))
    return Mlp(layers, "relu")


def embedding_param_budget(target_depth: int, width_cap: int) -> float:
    """``14 L W log W``, the nonzero-parameter ceiling of an embedded network."""
    return 14.0 * target_depth * width_cap * np.log(width_cap)
