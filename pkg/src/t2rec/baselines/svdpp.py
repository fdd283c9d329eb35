"""SVD++ with implicit item factors, trained by per-rating SGD.

Prediction: ``mu + b_u + b_i + q_i . (p_u + |N(u)|^-1/2 sum_{j in N(u)} y_j)``
where ``N(u)`` is the set of items rated by ``u`` in the training data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..data import ObservationSet


@dataclass
class SvdPpModel:
    user_factors: np.ndarray  # (n, k)
    item_factors: np.ndarray  # (m, k)
    implicit_factors: np.ndarray  # (m, k)
    user_bias: np.ndarray
    item_bias: np.ndarray
    global_mean: float
    reg: float
    indptr: np.ndarray  # CSR row pointers of N(u)
    rated: np.ndarray  # CSR column indices of N(u)

    @property
    def rank(self) -> int:
        return self.user_factors.shape[1]

    def implicit_sum(self, u: int) -> np.ndarray:
        items = self.rated[self.indptr[u] : self.indptr[u + 1]]
        if items.size == 0:
            return np.zeros(self.rank)
        return self.implicit_factors[items].sum(axis=0) / np.sqrt(items.size)

    def predict_pairs(self, users, items) -> np.ndarray:
        users = np.asarray(users)
        items = np.asarray(items)
        n, m = self.user_bias.size, self.item_bias.size
        out = np.full(users.shape, self.global_mean, dtype=np.float64)
        z_cache: dict[int, np.ndarray] = {}
        for t, (u, i) in enumerate(zip(users.tolist(), items.tolist())):
            u_ok, i_ok = 0 <= u < n, 0 <= i < m
            if u_ok:
                out[t] += self.user_bias[u]
            if i_ok:
                out[t] += self.item_bias[i]
            if u_ok and i_ok:
                if u not in z_cache:
                    z_cache[u] = self.user_factors[u] + self.implicit_sum(u)
                out[t] += self.item_factors[i] @ z_cache[u]
        return out

    def predict(self, data: ObservationSet) -> np.ndarray:
        return self.predict_pairs(data.users, data.items)


def svdpp_objective(model: SvdPpModel, data: ObservationSet) -> float:
    """Squared error plus ``reg`` times the squared norm of every parameter."""
    err = data.ratings - model.predict(data)
    norms = sum(
        float(np.sum(a**2))
        for a in (model.user_bias, model.item_bias, model.user_factors, model.item_factors, model.implicit_factors)
    )
    return float(np.sum(err**2) + model.reg * norms)


@njit(cache=True)
def _sgd_epoch(users, items, ratings, order, mu, bu, bi, P, Q, Y, indptr, rated, lr, reg):
    k = P.shape[1]
    z = np.empty(k)
    for t in order:
        u = users[t]
        i = items[t]
        start, stop = indptr[u], indptr[u + 1]
        norm = np.sqrt(stop - start) if stop > start else 1.0
        for f in range(k):
            z[f] = 0.0
        for s in range(start, stop):
            j = rated[s]
            for f in range(k):
                z[f] += Y[j, f]
        for f in range(k):
            z[f] /= norm
        est = mu + bu[u] + bi[i]
        for f in range(k):
            est += Q[i, f] * (P[u, f] + z[f])
        err = ratings[t] - est
        bu[u] += lr * (err - reg * bu[u])
        bi[i] += lr * (err - reg * bi[i])
        for f in range(k):
            puf = P[u, f]
            qif = Q[i, f]
            P[u, f] += lr * (err * qif - reg * puf)
            Q[i, f] += lr * (err * (puf + z[f]) - reg * qif)
            for s in range(start, stop):
                j = rated[s]
                Y[j, f] += lr * (err * qif / norm - reg * Y[j, f])


def _neighbourhoods(data: ObservationSet) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((data.items, data.users))
    counts = np.bincount(data.users, minlength=data.n_users)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return indptr, data.items[order].astype(np.int64)


def init_svdpp(data: ObservationSet, rank: int = 30, reg: float = 0.02, seed=0, init_std: float = 0.1) -> SvdPpModel:
    rng = np.random.default_rng(seed)
    n, m = data.n_users, data.n_items
    indptr, rated = _neighbourhoods(data)
    return SvdPpModel(
        rng.normal(0.0, init_std, (n, rank)) if init_std > 0 else np.zeros((n, rank)),
        rng.normal(0.0, init_std, (m, rank)) if init_std > 0 else np.zeros((m, rank)),
        rng.normal(0.0, init_std, (m, rank)) if init_std > 0 else np.zeros((m, rank)),
        np.zeros(n),
        np.zeros(m),
        float(data.ratings.mean()) if len(data) else 0.0,
        reg,
        indptr,
        rated,
    )


def sgd_epochs(model: SvdPpModel, data: ObservationSet, lr: float, epochs: int, seed=0) -> SvdPpModel:
    """Run ``epochs`` passes of per-rating SGD in place (shuffled each epoch)."""
    rng = np.random.default_rng(seed)
    users = data.users.astype(np.int64)
    items = data.items.astype(np.int64)
    for _ in range(epochs):
        order = rng.permutation(len(data)).astype(np.int64)
        _sgd_epoch(
            users, items, data.ratings, order, model.global_mean,
            model.user_bias, model.item_bias, model.user_factors, model.item_factors,
            model.implicit_factors, model.indptr, model.rated, lr, model.reg,
        )
    return model


def fit_svdpp(
    data: ObservationSet,
    rank: int = 30,
    reg: float = 0.02,
    lr: float = 5e-3,
    epochs: int = 20,
    seed: int | None = 0,
    init_std: float = 0.1,
) -> SvdPpModel:
    if rank < 1 or epochs < 1:
        raise ValueError("rank and epochs must be >= 1")
    model = init_svdpp(data, rank, reg, seed, init_std)
    return sgd_epochs(model, data, lr, epochs, seed)
