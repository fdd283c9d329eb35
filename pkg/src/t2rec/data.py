"""Observed ratings plus user/item covariate tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ObservationSet:
    """Rating triples ``(user, item, value)`` over integer ids.

    Covariate tables are dense arrays indexed by id: row ``u`` of
    ``user_covariates`` belongs to user ``u``. Either table may be ``None`` for
    the id-only baselines.
    """

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_covariates: np.ndarray | None = None
    item_covariates: np.ndarray | None = None
    n_users: int | None = None
    n_items: int | None = None

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.ratings = np.asarray(self.ratings, dtype=np.float64)
        if not (self.users.shape == self.items.shape == self.ratings.shape) or self.users.ndim != 1:
            raise ValueError("users, items and ratings must be 1-D arrays of equal length")
        if self.user_covariates is not None:
            self.user_covariates = np.asarray(self.user_covariates, dtype=np.float64)
        if self.item_covariates is not None:
            self.item_covariates = np.asarray(self.item_covariates, dtype=np.float64)
        if self.n_users is None:
            self.n_users = self._universe(self.user_covariates, self.users)
        if self.n_items is None:
            self.n_items = self._universe(self.item_covariates, self.items)
        self._check()

    @staticmethod
    def _universe(table, ids) -> int:
        if table is not None:
            return int(table.shape[0])
        return int(ids.max()) + 1 if ids.size else 0

    def _check(self):
        if self.users.size and (self.users.min() < 0 or self.items.min() < 0):
            raise ValueError("ids must be non-negative")
        if self.users.size and (self.users.max() >= self.n_users or self.items.max() >= self.n_items):
            raise ValueError("rated id without a covariate row")
        if not np.all(np.isfinite(self.ratings)):
            raise ValueError("ratings must be finite")
        keys = self.users * max(self.n_items, 1) + self.items
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate (user, item) pair")

    def __len__(self) -> int:
        return int(self.ratings.size)

    def subset(self, index) -> ObservationSet:
        """Ratings at ``index``; covariate tables and id universe are shared."""
        index = np.asarray(index)
        if index.dtype != bool:
            index = index.astype(np.int64)
        return ObservationSet(
            self.users[index],
            self.items[index],
            self.ratings[index],
            self.user_covariates,
            self.item_covariates,
            self.n_users,
            self.n_items,
        )

    def pair_keys(self) -> np.ndarray:
        return self.users * self.n_items + self.items

    def triples(self):
        return zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist())
