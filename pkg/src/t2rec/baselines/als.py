"""Regularized SVD fitted by alternating least squares."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..data import ObservationSet


@dataclass
class MfModel:
    user_factors: np.ndarray  # (n, k)
    item_factors: np.ndarray  # (m, k)
    global_mean: float
    reg: float
    user_counts: np.ndarray
    item_counts: np.ndarray
    objective_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.user_factors.shape[1] != self.item_factors.shape[1]:
            raise ValueError("user and item factors must have the same width")
        if not (np.all(np.isfinite(self.user_factors)) and np.all(np.isfinite(self.item_factors))):
            raise ValueError("factors must be finite")

    @property
    def rank(self) -> int:
        return self.user_factors.shape[1]

    def predict_pairs(self, users, items) -> np.ndarray:
        users = np.asarray(users)
        items = np.asarray(items)
        out = np.full(users.shape, self.global_mean, dtype=np.float64)
        known = (users < self.user_counts.size) & (items < self.item_counts.size)
        known[known] &= (self.user_counts[users[known]] > 0) & (self.item_counts[items[known]] > 0)
        out[known] = np.einsum("nk,nk->n", self.user_factors[users[known]], self.item_factors[items[known]])
        return out

    def predict(self, data: ObservationSet) -> np.ndarray:
        return self.predict_pairs(data.users, data.items)


def als_objective(user_factors, item_factors, data: ObservationSet, reg: float) -> float:
    """``sum (r - <p_u, q_i>)^2 + reg (||P||_F^2 + ||Q||_F^2)``."""
    pred = np.einsum("nk,nk->n", user_factors[data.users], item_factors[data.items])
    return float(np.sum((data.ratings - pred) ** 2) + reg * (np.sum(user_factors**2) + np.sum(item_factors**2)))


def _half_sweep(ratings: sp.csr_matrix, pattern: sp.csr_matrix, other: np.ndarray, reg: float) -> np.ndarray:
    """Solve every row's ridge problem against the fixed ``other`` factors."""
    k = other.shape[1]
    outer = (other[:, :, None] * other[:, None, :]).reshape(other.shape[0], k * k)
    gram = np.asarray(pattern @ outer).reshape(-1, k, k)
    rhs = np.asarray(ratings @ other)
    if reg > 0:
        gram += reg * np.eye(k)
        return np.linalg.solve(gram, rhs[:, :, None])[:, :, 0]
    # minimum-norm least squares; rows with no ratings come out as zero
    return np.einsum("nkl,nl->nk", np.linalg.pinv(gram, hermitian=True), rhs)


def fit_rsvd(
    data: ObservationSet,
    rank: int = 30,
    reg: float = 0.1,
    iters: int = 30,
    seed: int | None = 0,
    init_std: float = 0.1,
) -> MfModel:
    """Alternate exact ridge solves for user and item factors.

    Each half-sweep minimizes the regularized objective over one factor
    matrix, so ``objective_trace`` (initial value, then one entry per
    half-sweep) is non-increasing.
    """
    if rank < 1 or iters < 1:
        raise ValueError("rank and iters must be >= 1")
    if reg < 0:
        raise ValueError("reg must be non-negative")
    n, m = data.n_users, data.n_items
    rng = np.random.default_rng(seed)
    R = sp.csr_matrix((data.ratings, (data.users, data.items)), shape=(n, m))
    S = sp.csr_matrix((np.ones(len(data)), (data.users, data.items)), shape=(n, m))
    Rt, St = R.T.tocsr(), S.T.tocsr()
    user_counts = np.bincount(data.users, minlength=n)
    item_counts = np.bincount(data.items, minlength=m)

    P = rng.normal(0.0, init_std, size=(n, rank))
    Q = rng.normal(0.0, init_std, size=(m, rank))
    P[user_counts == 0] = 0.0
    Q[item_counts == 0] = 0.0
    trace = [als_objective(P, Q, data, reg)]
    for _ in range(iters):
        P = _half_sweep(R, S, Q, reg)
        trace.append(als_objective(P, Q, data, reg))
        Q = _half_sweep(Rt, St, P, reg)
        trace.append(als_objective(P, Q, data, reg))
    mean = float(data.ratings.mean()) if len(data) else 0.0
    return MfModel(P, Q, mean, reg, user_counts, item_counts, trace)
