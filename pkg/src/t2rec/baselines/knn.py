"""Top-K neighbourhood prediction with mean-squared-difference similarity.

``sim(a, b) = 1 / (msd(a, b) + 1)`` where ``msd`` is the mean squared
difference over co-rated entries; pairs without a co-rating are unlinked.
Prediction is the similarity-weighted mean over the ``k`` most similar linked
neighbours that rated the target (ties broken towards the lower id). With no
such neighbour the global mean is returned and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from ..data import ObservationSet

Mode = Literal["user_based", "item_based"]


class KnnPrediction(NamedTuple):
    value: float
    fallback: bool


@dataclass
class KnnModel:
    mode: Mode
    k: int
    similarity: np.ndarray  # (entities, entities), 0 = unlinked, diagonal 0
    ratings: np.ndarray  # dense (entities, targets); only meaningful where mask
    mask: np.ndarray
    global_mean: float

    def _orient(self, u: int, i: int) -> tuple[int, int]:
        return (u, i) if self.mode == "user_based" else (i, u)

    def neighbours(self, u: int, i: int) -> np.ndarray:
        """Linked entities that rated the target, most similar first."""
        a, t = self._orient(u, i)
        sims = self.similarity[a]
        cand = np.flatnonzero(self.mask[:, t] & (sims > 0))
        # stable sort on -sim keeps ascending id order among ties
        return cand[np.argsort(-sims[cand], kind="stable")]

    def _known(self, u: int, i: int) -> bool:
        a, t = self._orient(u, i)
        return 0 <= a < self.similarity.shape[0] and 0 <= t < self.mask.shape[1]

    def predict_one(self, u: int, i: int, k: int | None = None) -> KnnPrediction:
        if not self._known(u, i):
            return KnnPrediction(self.global_mean, True)
        k = self.k if k is None else k
        a, t = self._orient(u, i)
        top = self.neighbours(u, i)[:k]
        if top.size == 0:
            return KnnPrediction(self.global_mean, True)
        w = self.similarity[a, top]
        return KnnPrediction(float(w @ self.ratings[top, t] / w.sum()), False)

    def predict_pairs_multi_k(self, users, items, ks) -> np.ndarray:
        """Predictions for several neighbourhood sizes at once, shape ``(len(ks), n)``."""
        ks = np.asarray(ks, dtype=np.int64)
        out = np.full((ks.size, len(users)), self.global_mean, dtype=np.float64)
        for col, (u, i) in enumerate(zip(np.asarray(users).tolist(), np.asarray(items).tolist())):
            if not self._known(u, i):
                continue
            a, t = self._orient(u, i)
            nb = self.neighbours(u, i)
            if nb.size == 0:
                continue
            w = self.similarity[a, nb]
            num = np.cumsum(w * self.ratings[nb, t])
            den = np.cumsum(w)
            last = np.minimum(ks, nb.size) - 1
            out[:, col] = num[last] / den[last]
        return out

    def predict_pairs(self, users, items) -> np.ndarray:
        return self.predict_pairs_multi_k(users, items, [self.k])[0]

    def predict(self, data: ObservationSet) -> np.ndarray:
        return self.predict_pairs(data.users, data.items)


def msd_similarity(ratings: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-vs-row MSD similarity of a dense rating matrix; unlinked pairs and the diagonal are 0."""
    m = mask.astype(np.float64)
    r = np.where(mask, ratings, 0.0)
    r2 = r * r
    common = m @ m.T
    sq = r2 @ m.T + m @ r2.T - 2.0 * (r @ r.T)
    sq = np.maximum(sq, 0.0)
    sim = np.zeros_like(common)
    linked = common >= 1
    sim[linked] = 1.0 / (sq[linked] / common[linked] + 1.0)
    np.fill_diagonal(sim, 0.0)
    return sim


def fit_knn(data: ObservationSet, mode: Mode = "user_based", k: int = 40) -> KnnModel:
    if k < 1:
        raise ValueError("k must be >= 1")
    if mode not in ("user_based", "item_based"):
        raise ValueError(f"unknown mode {mode!r}")
    shape = (data.n_users, data.n_items)
    ratings = np.zeros(shape)
    mask = np.zeros(shape, dtype=bool)
    ratings[data.users, data.items] = data.ratings
    mask[data.users, data.items] = True
    if mode == "item_based":
        ratings, mask = ratings.T.copy(), mask.T.copy()
    mean = float(data.ratings.mean()) if len(data) else 0.0
    return KnnModel(mode, k, msd_similarity(ratings, mask), ratings, mask, mean)


def predict_knn(model: KnnModel, u: int, i: int) -> KnnPrediction:
    return model.predict_one(u, i)
