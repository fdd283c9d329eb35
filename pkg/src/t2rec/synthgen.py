"""Synthetic ratings with trigonometric ground-truth towers.

The true user embedding has components

    f_j(x) = sum_l alpha[j,l] sin(2 pi x_l) + sum_l beta[j,l] cos(2 pi x_l)
             + sum_{l<D} zeta[j,l] x_l x_{l+1}

and the item embedding mirrors it with its own coefficients. Covariates live
on a ``d``-dimensional manifold in ``[0, 1]^D``: the first ``d`` coordinates
are uniform and coordinate ``l >= d`` repeats coordinate ``l - d``.

Randomness: every stream is ``numpy.random.default_rng([seed, stream])`` with
the fixed stream ids below. Gaussian noise comes from numpy's ``Generator.normal``
(ziggurat method).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .data import ObservationSet

STREAM_GROUND_TRUTH = 0
STREAM_USER_COVARIATES = 1
STREAM_ITEM_COVARIATES = 2
STREAM_RATINGS = 3


@dataclass
class SyntheticSpec:
    n_users: int = 1500
    n_items: int = 1500
    D_u: int = 50
    D_i: int = 50
    p: int = 30
    d: int = 20
    n_ratings: int = 100_000
    noise_var: float = 0.1
    coeff_range: float = 0.15
    seed: int = 0

    def validate(self) -> None:
        """Raise ``ValueError`` naming the first violated invariant."""
        checks = [
            ("n_users >= 1", self.n_users >= 1),
            ("n_items >= 1", self.n_items >= 1),
            ("p >= 1", self.p >= 1),
            ("D_u >= 2", self.D_u >= 2),
            ("D_i >= 2", self.D_i >= 2),
            ("1 <= d <= min(D_u, D_i)", 1 <= self.d <= min(self.D_u, self.D_i)),
            ("1 <= n_ratings <= n_users*n_items", 1 <= self.n_ratings <= self.n_users * self.n_items),
            ("noise_var >= 0", self.noise_var >= 0),
            ("coeff_range >= 0", self.coeff_range >= 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"invalid SyntheticSpec: violates {name}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> SyntheticSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown SyntheticSpec fields: {sorted(unknown)}")
        return cls(**doc)

    @property
    def sparsity(self) -> float:
        return self.n_ratings / (self.n_users * self.n_items)


@dataclass
class GroundTruth:
    alpha: np.ndarray  # (p, D_u)
    beta: np.ndarray  # (p, D_u)
    zeta: np.ndarray  # (p, D_u - 1)
    alpha_item: np.ndarray  # (p, D_i)
    beta_item: np.ndarray
    zeta_item: np.ndarray  # (p, D_i - 1)

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, doc: dict) -> GroundTruth:
        return cls(**{f.name: np.asarray(doc[f.name], dtype=np.float64) for f in fields(cls)})


def _rng(spec: SyntheticSpec, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, stream])


def draw_ground_truth(spec: SyntheticSpec) -> GroundTruth:
    spec.validate()
    rng = _rng(spec, STREAM_GROUND_TRUTH)
    c = spec.coeff_range

    def draw(shape):
        return rng.uniform(-c, c, size=shape) if c > 0 else np.zeros(shape)

    return GroundTruth(
        draw((spec.p, spec.D_u)),
        draw((spec.p, spec.D_u)),
        draw((spec.p, spec.D_u - 1)),
        draw((spec.p, spec.D_i)),
        draw((spec.p, spec.D_i)),
        draw((spec.p, spec.D_i - 1)),
    )


def _embedding(alpha, beta, zeta, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != alpha.shape[1]:
        raise ValueError(f"expected covariates of length {alpha.shape[1]}, got {x.shape[1]}")
    angle = 2.0 * np.pi * x
    out = np.sin(angle) @ alpha.T + np.cos(angle) @ beta.T + (x[:, :-1] * x[:, 1:]) @ zeta.T
    return out[0] if single else out


def true_user_embedding(gt: GroundTruth, x_u) -> np.ndarray:
    return _embedding(gt.alpha, gt.beta, gt.zeta, x_u)


def true_item_embedding(gt: GroundTruth, x_i) -> np.ndarray:
    return _embedding(gt.alpha_item, gt.beta_item, gt.zeta_item, x_i)


def true_scores(gt: GroundTruth, user_cov, item_cov, users, items) -> np.ndarray:
    """Noise-free ratings ``<f*(x_u), f~*(x_i)>`` for the given id pairs."""
    eu = true_user_embedding(gt, user_cov)
    ei = true_item_embedding(gt, item_cov)
    return np.einsum("nk,nk->n", eu[users], ei[items])


def replicate_columns(base: np.ndarray, D: int) -> np.ndarray:
    """Extend ``(count, d)`` coordinates to ``D`` columns with ``x[:, l] = x[:, l - d]``."""
    d = base.shape[1]
    cols = np.arange(D) % d
    return base[:, cols]


def generate_covariates(
    spec: SyntheticSpec, count: int, which: str = "user", rng: np.random.Generator | None = None
) -> np.ndarray:
    spec.validate()
    if which not in ("user", "item"):
        raise ValueError("which must be 'user' or 'item'")
    D = spec.D_u if which == "user" else spec.D_i
    if rng is None:
        rng = _rng(spec, STREAM_USER_COVARIATES if which == "user" else STREAM_ITEM_COVARIATES)
    return replicate_columns(rng.uniform(0.0, 1.0, size=(count, spec.d)), D)


def generate_ratings(
    spec: SyntheticSpec, gt: GroundTruth, user_cov: np.ndarray, item_cov: np.ndarray
) -> ObservationSet:
    spec.validate()
    if user_cov.shape[0] != spec.n_users or item_cov.shape[0] != spec.n_items:
        raise ValueError("covariate row counts must equal n_users / n_items")
    rng = _rng(spec, STREAM_RATINGS)
    keys = np.sort(rng.choice(spec.n_users * spec.n_items, size=spec.n_ratings, replace=False))
    users, items = np.divmod(keys, spec.n_items)
    clean = true_scores(gt, user_cov, item_cov, users, items)
    noise = rng.normal(0.0, np.sqrt(spec.noise_var), size=keys.size) if spec.noise_var > 0 else 0.0
    return ObservationSet(users, items, clean + noise, user_cov, item_cov, spec.n_users, spec.n_items)


def generate(spec: SyntheticSpec) -> tuple[ObservationSet, GroundTruth]:
    """Ground truth, both covariate tables and the observed ratings in one call."""
    gt = draw_ground_truth(spec)
    user_cov = generate_covariates(spec, spec.n_users, "user")
    item_cov = generate_covariates(spec, spec.n_items, "item")
    return generate_ratings(spec, gt, user_cov, item_cov), gt
