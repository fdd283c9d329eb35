"""Randomized search for violations of the parameter-perturbation bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import LayerParams, Mlp, forward
from .bounds import lipschitz_constant


@dataclass(frozen=True)
class NetFamily:
    """ReLU nets ``D -> 2W -> ... -> 2W -> p`` with depth ``L`` and parameters in ``[-B, B]``."""

    W: int
    L: int
    B: float
    D: int | None = None  # input width; defaults to min(4, W)
    p: int = 2

    def __post_init__(self):
        if self.D is None:
            object.__setattr__(self, "D", min(4, self.W))
        if not 1 <= self.D <= self.W:
            raise ValueError(f"input width D={self.D} must lie in [1, W={self.W}]")

    def widths(self) -> list[int]:
        if self.L == 1:
            return [self.D, self.p]
        return [self.D] + [2 * self.W] * (self.L - 1) + [self.p]

    def sample(self, rng: np.random.Generator) -> Mlp:
        w = self.widths()
        layers = [
            LayerParams(rng.uniform(-self.B, self.B, (o, i)), rng.uniform(-self.B, self.B, o))
            for i, o in zip(w[:-1], w[1:])
        ]
        return Mlp(layers, "relu")


@dataclass(frozen=True)
class LipschitzReport:
    trials: int
    violations: int
    max_ratio: float  # largest observed ||f - f'|| / (p C eps)
    bound: float  # p C eps

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.max_ratio <= 1.0


def perturb(net: Mlp, eps: float, B: float, rng: np.random.Generator) -> Mlp:
    """Move every parameter by ``eps`` in a random direction, staying in ``[-B, B]``."""
    def move(a):
        return np.clip(a + eps * rng.choice([-1.0, 1.0], size=a.shape), -B, B)

    return Mlp([LayerParams(move(lp.weights), move(lp.bias)) for lp in net.layers], net.activation)


def perturbation_ratio(net: Mlp, other: Mlp, x: np.ndarray, p: int, C: float, eps: float) -> float:
    diff = np.linalg.norm(forward(net, x) - forward(other, x), axis=-1)
    return float(np.max(diff) / (p * C * eps))


def verify_lipschitz(
    family: NetFamily,
    eps: float = 1e-3,
    trials: int = 500,
    inputs_per_trial: int = 16,
    seed: int | None = 0,
) -> LipschitzReport:
    """Sample parameter pairs at sup-distance ``eps`` and inputs on ``[-1, 1]^D``.

    Half of the inputs are cube corners, where the first-layer response is largest.
    """
    rng = np.random.default_rng(seed)
    C = lipschitz_constant(family.W, family.L, family.B)
    worst, violations = 0.0, 0
    for _ in range(trials):
        net = family.sample(rng)
        other = perturb(net, eps, family.B, rng)
        half = inputs_per_trial // 2
        x = np.vstack([
            rng.uniform(-1.0, 1.0, (inputs_per_trial - half, family.D)),
            rng.choice([-1.0, 1.0], size=(half, family.D)),
        ])
        r = perturbation_ratio(net, other, x, family.p, C, eps)
        worst = max(worst, r)
        violations += r > 1.0
    return LipschitzReport(trials, int(violations), worst, family.p * C * eps)
