"""Property suites shared by the ``theorycheck`` command and the test-suite."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn import LayerParams, Mlp, arch_stats, backward, flatten_grads, flatten_params, forward, unflatten_params
from .dimension import minkowski_dimension
from .embedding import embed_network, embedding_param_budget
from .lipschitz import NetFamily, verify_lipschitz


@dataclass
class SuiteResult:
    name: str
    cases: int
    violations: int
    worst: float  # suite-specific worst statistic (error, ratio or estimate gap)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ok"] = self.ok
        return out


# --------------------------------------------------------------------------- gradients


def finite_difference_grad(net: Mlp, x: np.ndarray, upstream: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``sum(upstream * net(x))`` with respect to every parameter."""
    theta = flatten_params(net)
    out = np.empty_like(theta)
    for j in range(theta.size):
        t = theta.copy()
        t[j] += h
        up = np.sum(upstream * forward(unflatten_params(net, t), x))
        t[j] -= 2 * h
        down = np.sum(upstream * forward(unflatten_params(net, t), x))
        out[j] = (up - down) / (2 * h)
    return out


def gradient_suite(n_nets: int = 100, rel_tol: float = 1e-5, abs_tol: float = 1e-8, seed: int = 0) -> SuiteResult:
    """Analytic parameter gradients against central differences on random 3-4 layer nets.

    An entry passes if it is within ``abs_tol`` absolutely or ``rel_tol`` relatively.
    """
    rng = np.random.default_rng(seed)
    violations, worst_abs, worst_rel = 0, 0.0, 0.0
    for k in range(n_nets):
        depth = int(rng.integers(3, 5))
        widths = [int(w) for w in rng.integers(2, 7, size=depth + 1)]
        layers = [
            LayerParams(rng.normal(0, 0.8, (o, i)), rng.normal(0, 0.3, o))
            for i, o in zip(widths[:-1], widths[1:])
        ]
        net = Mlp(layers, "sigmoid" if k % 2 else "relu")
        x = rng.normal(size=(3, widths[0]))
        upstream = rng.normal(size=(3, widths[-1]))
        analytic = flatten_grads(backward(net, x, upstream))
        numeric = finite_difference_grad(net, x, upstream)
        err = np.abs(analytic - numeric)
        rel = err / np.maximum(np.abs(numeric), 1e-300)
        bad = (err > abs_tol) & (rel > rel_tol)
        violations += int(bad.sum())
        worst_abs = max(worst_abs, float(err.max()))
        finite_rel = rel[err > abs_tol]
        if finite_rel.size:
            worst_rel = max(worst_rel, float(finite_rel.max()))
    return SuiteResult("gradient", n_nets, violations, worst_abs, {"worst_relative_above_abs_tol": worst_rel})


# --------------------------------------------------------------------------- embedding


def random_sparse_relu_net(rng, widths: list[int], max_nonzero: int) -> Mlp:
    """Random ReLU net with parameters zeroed until at most ``max_nonzero`` remain."""
    layers = [LayerParams(rng.normal(size=(o, i)), rng.normal(size=o)) for i, o in zip(widths[:-1], widths[1:])]
    flat = np.concatenate([np.concatenate([lp.weights.ravel(), lp.bias]) for lp in layers])
    if flat.size > max_nonzero:
        drop = rng.choice(flat.size, flat.size - max_nonzero, replace=False)
        flat[drop] = 0.0
    return unflatten_params(Mlp(layers, "relu"), flat)


def embedding_suite(
    n_nets: int = 50,
    n_inputs: int = 1000,
    target_depth: int = 6,
    width_cap: int = 24,
    tol: float = 1e-10,
    seed: int = 0,
) -> SuiteResult:
    """Output identity and nonzero budget of the fixed-shape embedding.

    Depths cycle through ``L``, ``L - 1`` and ``L - 3``.
    """
    rng = np.random.default_rng(seed)
    L, W = target_depth, width_cap
    offsets = (0, 1, 3)
    violations, worst = 0, 0.0
    per_case: dict[str, float] = {}
    budget = float(embedding_param_budget(L, W))
    for k in range(n_nets):
        depth = L - offsets[k % 3]
        D = int(rng.integers(2, 6))
        p = int(rng.integers(1, 4))
        widths = [D] + [int(w) for w in rng.integers(2, 9, size=depth - 1)] + [p]
        net = random_sparse_relu_net(rng, widths, W)
        q = embed_network(net, L, W)
        x = rng.uniform(-2.0, 2.0, (n_inputs, D))
        dev = float(np.max(np.abs(forward(q, x) - forward(net, x))))
        nnz = arch_stats(q).effective_params
        shape_ok = q.depth == L and all(w == 2 * W for w in q.widths[1:-1])
        violations += int(dev > tol or nnz > budget or not shape_ok)
        worst = max(worst, dev)
        key = f"U=L-{offsets[k % 3]}"
        per_case[key] = max(per_case.get(key, 0.0), dev)
    return SuiteResult("embedding", n_nets, violations, worst, {"max_deviation_by_case": per_case, "budget": budget})


# --------------------------------------------------------------------------- Lipschitz

DEFAULT_LIPSCHITZ_GRID = ((8, 3, 0.5), (4, 2, 1.0), (2, 4, 1.0), (16, 2, 0.25), (3, 5, 0.5), (6, 1, 0.5))


def lipschitz_suite(grid=DEFAULT_LIPSCHITZ_GRID, trials: int = 500, eps: float = 1e-3, seed: int = 0) -> SuiteResult:
    violations, worst = 0, 0.0
    ratios = {}
    for idx, (W, L, B) in enumerate(grid):
        rep = verify_lipschitz(NetFamily(W, L, B), eps=eps, trials=trials, seed=seed + idx)
        violations += rep.violations
        worst = max(worst, rep.max_ratio)
        ratios[f"W={W},L={L},B={B}"] = rep.max_ratio
    return SuiteResult("lipschitz", len(grid) * trials, violations, worst, {"max_ratio": ratios})


# --------------------------------------------------------------------------- box counting


def segment_points(n: int = 10_000, seed: int = 0) -> np.ndarray:
    """Uniform points on a slanted segment inside the unit square."""
    t = np.random.default_rng(seed).uniform(0.0, 1.0, n)
    return np.column_stack([0.1 + 0.8 * t, 0.2 + 0.6 * t])


def dimension_suite(seed: int = 0, tol: float = 0.1) -> SuiteResult:
    """Line segment near 1, a repeated point exactly 0, and invariance to column permutation and duplication."""
    rng = np.random.default_rng(seed)
    scales = [2.0**-k for k in range(3, 8)]
    seg = minkowski_dimension(segment_points(seed=seed), scales)
    point = minkowski_dimension(np.full((500, 3), 0.37))
    cloud = rng.uniform(size=(4000, 2))
    base = minkowski_dimension(cloud)
    permuted = minkowski_dimension(cloud[:, ::-1])
    duplicated = minkowski_dimension(np.hstack([cloud, cloud]))
    checks = {
        "segment_in_[0.9,1.1]": 0.9 <= seg <= 1.1,
        "single_point_is_0": point == 0.0,
        "permutation_invariant": abs(permuted - base) <= 1e-12,
        "duplication_within_tol": duplicated - base <= tol,
    }
    details = {"segment": seg, "single_point": point, "base": base, "permuted": permuted, "duplicated": duplicated, "checks": checks}
    return SuiteResult("dimension", len(checks), sum(not v for v in checks.values()), abs(seg - 1.0), details)


def run_all(seed: int = 0, quick: bool = False) -> list[SuiteResult]:
    return [
        gradient_suite(n_nets=20 if quick else 100, seed=seed),
        embedding_suite(n_nets=15 if quick else 50, seed=seed),
        lipschitz_suite(trials=100 if quick else 500, seed=seed),
        dimension_suite(seed=seed),
    ]
