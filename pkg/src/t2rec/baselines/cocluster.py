"""Co-clustering collaborative filtering.

Prediction for a known user ``u`` in cluster ``g`` and known item ``i`` in
cluster ``h``::

    C[g, h] + (mu_u - U[g]) + (mu_i - I[h])

with ``mu_u``/``mu_i`` the user/item mean ratings, ``U``/``I`` the mean rating
inside each user/item cluster and ``C`` the co-cluster level. ``C`` is fitted
as ``U[g] + I[h]`` plus the block mean of ``r - mu_u - mu_i``, which is the
least-squares optimum for fixed assignments; reassignment and refitting then
form a coordinate descent and the training SSE never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import ObservationSet


@dataclass
class CoClusterModel:
    user_cluster: np.ndarray
    item_cluster: np.ndarray
    cocluster_mean: np.ndarray  # (g_u, g_i)
    user_cluster_mean: np.ndarray
    item_cluster_mean: np.ndarray
    user_mean: np.ndarray  # nan for users without ratings
    item_mean: np.ndarray
    global_mean: float
    sse_trace: list[float] = field(default_factory=list)

    def predict_pairs(self, users, items) -> np.ndarray:
        users = np.asarray(users)
        items = np.asarray(items)
        out = np.full(users.shape, self.global_mean, dtype=np.float64)
        mu_u = np.full(users.shape, np.nan)
        mu_i = np.full(items.shape, np.nan)
        u_in = (users >= 0) & (users < self.user_mean.size)
        i_in = (items >= 0) & (items < self.item_mean.size)
        mu_u[u_in] = self.user_mean[users[u_in]]
        mu_i[i_in] = self.item_mean[items[i_in]]
        has_u, has_i = ~np.isnan(mu_u), ~np.isnan(mu_i)

        both = has_u & has_i
        g = self.user_cluster[users[both]]
        h = self.item_cluster[items[both]]
        out[both] = (
            self.cocluster_mean[g, h]
            + (mu_u[both] - self.user_cluster_mean[g])
            + (mu_i[both] - self.item_cluster_mean[h])
        )
        only_u = has_u & ~has_i
        out[only_u] = mu_u[only_u]
        only_i = has_i & ~has_u
        out[only_i] = mu_i[only_i]
        return out

    def predict(self, data: ObservationSet) -> np.ndarray:
        return self.predict_pairs(data.users, data.items)


def _group_mean(values, groups, size, fill):
    total = np.bincount(groups, weights=values, minlength=size)
    count = np.bincount(groups, minlength=size)
    out = np.full(size, fill, dtype=np.float64)
    out[count > 0] = total[count > 0] / count[count > 0]
    return out


def _initial_assignment(count: int, n_clusters: int, rng) -> np.ndarray:
    # round-robin over a random permutation: no empty cluster when n_clusters <= count
    assign = np.empty(count, dtype=np.int64)
    assign[rng.permutation(count)] = np.arange(count) % n_clusters
    return assign


class _State:
    def __init__(self, data: ObservationSet, g_u: int, g_i: int, user_cluster, item_cluster):
        self.data = data
        self.g_u, self.g_i = g_u, g_i
        self.mu = float(data.ratings.mean())
        self.user_mean = _group_mean(data.ratings, data.users, data.n_users, np.nan)
        self.item_mean = _group_mean(data.ratings, data.items, data.n_items, np.nan)
        self.resid = data.ratings - self.user_mean[data.users] - self.item_mean[data.items]
        self.user_cluster = user_cluster
        self.item_cluster = item_cluster
        self.refit()

    def refit(self):
        d = self.data
        gu, gi = self.user_cluster[d.users], self.item_cluster[d.items]
        self.U = _group_mean(d.ratings, gu, self.g_u, self.mu)
        self.I = _group_mean(d.ratings, gi, self.g_i, self.mu)
        block = gu * self.g_i + gi
        total = np.bincount(block, weights=self.resid, minlength=self.g_u * self.g_i)
        count = np.bincount(block, minlength=self.g_u * self.g_i)
        offset = (self.mu - self.U[:, None] - self.I[None, :]).ravel()
        offset[count > 0] = total[count > 0] / count[count > 0]
        self.theta = offset.reshape(self.g_u, self.g_i)

    def sse(self) -> float:
        d = self.data
        pred = self.theta[self.user_cluster[d.users], self.item_cluster[d.items]]
        return float(np.sum((self.resid - pred) ** 2))

    def reassign(self, owners, others, other_cluster, own_cluster, n_owners, theta):
        # cost[o, c]: SSE of owner o's ratings if it sat in cluster c
        h = other_cluster[others]
        cand = theta[:, h].T  # (nnz, clusters)
        err = (self.resid[:, None] - cand) ** 2
        n_clusters = theta.shape[0]
        cost = np.zeros((n_owners, n_clusters))
        for c in range(n_clusters):
            cost[:, c] = np.bincount(owners, weights=err[:, c], minlength=n_owners)
        best = np.argmin(cost, axis=1)
        rows = np.arange(n_owners)
        keep = cost[rows, own_cluster] <= cost[rows, best]
        return np.where(keep, own_cluster, best)


def fit_cocluster(data: ObservationSet, g_u: int = 3, g_i: int = 3, iters: int = 20, seed: int | None = 0) -> CoClusterModel:
    if not 1 <= g_u <= data.n_users or not 1 <= g_i <= data.n_items:
        raise ValueError("need 1 <= g_u <= n_users and 1 <= g_i <= n_items")
    if len(data) == 0:
        raise ValueError("co-clustering needs at least one rating")
    rng = np.random.default_rng(seed)
    st = _State(
        data, g_u, g_i,
        _initial_assignment(data.n_users, g_u, rng),
        _initial_assignment(data.n_items, g_i, rng),
    )
    trace = [st.sse()]
    for _ in range(iters):
        st.user_cluster = st.reassign(data.users, data.items, st.item_cluster, st.user_cluster, data.n_users, st.theta)
        st.refit()
        st.item_cluster = st.reassign(data.items, data.users, st.user_cluster, st.item_cluster, data.n_items, st.theta.T)
        st.refit()
        trace.append(st.sse())
    cocluster = st.theta + st.U[:, None] + st.I[None, :]
    return CoClusterModel(
        st.user_cluster, st.item_cluster, cocluster, st.U, st.I,
        st.user_mean, st.item_mean, st.mu, trace,
    )
