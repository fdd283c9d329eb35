"""Two-tower recommender: inner-product scoring, penalized squared loss, SGD.

The user tower maps covariates ``x_u`` to ``R^p``, the item tower maps ``x_i``
to ``R^p`` and the predicted rating is the inner product of the two
embeddings. Training minimizes

    (1/|Omega|) sum (k_ui - <f(x_u), g(x_i)>)^2 + lam * (J(f) + J(g))

with ``J`` the sum of squared Frobenius norms of weights and squared norms of
biases. Every parameter follows the exact gradient of that objective,
restricted to the current minibatch.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from .data import ObservationSet
from .nn import Mlp, backward_arrays, forward, forward_cache, init_mlp

_logger = logging.getLogger(__name__)


@dataclass
class TwoTowerModel:
    user_tower: Mlp
    item_tower: Mlp

    def __post_init__(self):
        if self.user_tower.output_dim != self.item_tower.output_dim:
            raise ValueError(
                f"towers disagree on embedding size: {self.user_tower.output_dim} vs {self.item_tower.output_dim}"
            )

    @property
    def embed_dim(self) -> int:
        return self.user_tower.output_dim

    def copy(self) -> TwoTowerModel:
        return TwoTowerModel(self.user_tower.copy(), self.item_tower.copy())

    def predict(self, data: ObservationSet) -> np.ndarray:
        """Scores for every rated pair of ``data``."""
        eu = forward(self.user_tower, data.user_covariates)
        ei = forward(self.item_tower, data.item_covariates)
        return np.einsum("nk,nk->n", eu[data.users], ei[data.items])


@dataclass
class TrainConfig:
    lam: float = 0.0
    lr_init: float = 1e-2
    lr_decay: float = 0.9
    lr_min: float = 5e-3
    batch_size: int = 128
    max_epochs: int = 300
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if not 0 < self.lr_min <= self.lr_init:
            raise ValueError("need 0 < lr_min <= lr_init")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("need 0 < lr_decay <= 1")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience and max_epochs must be >= 1")

    def learning_rate(self, epoch: int) -> float:
        return max(self.lr_init * self.lr_decay**epoch, self.lr_min)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["lambda"] = doc.pop("lam")
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> TrainConfig:
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**doc)


def init_two_tower(
    D_u: int,
    D_i: int,
    embed_dim: int = 30,
    hidden: int = 50,
    n_layers: int = 5,
    activation: str = "relu",
    seed: int | None = 0,
) -> TwoTowerModel:
    """Fully-connected towers with ``n_layers`` layers and ``hidden`` units per hidden layer."""
    rng = np.random.default_rng(seed)
    widths_u = [D_u] + [hidden] * (n_layers - 1) + [embed_dim]
    widths_i = [D_i] + [hidden] * (n_layers - 1) + [embed_dim]
    return TwoTowerModel(init_mlp(widths_u, activation, rng), init_mlp(widths_i, activation, rng))


def score(model: TwoTowerModel, x_u, x_i):
    """``<f(x_u), g(x_i)>``; batched inputs give one score per row."""
    eu = forward(model.user_tower, x_u)
    ei = forward(model.item_tower, x_i)
    return np.sum(eu * ei, axis=-1)


def _tower_penalty(net: Mlp) -> float:
    return sum(float(np.sum(p.weights**2) + np.sum(p.bias**2)) for p in net.layers)


def penalty(model: TwoTowerModel) -> float:
    return _tower_penalty(model.user_tower) + _tower_penalty(model.item_tower)


def objective(model: TwoTowerModel, data: ObservationSet, lam: float) -> float:
    if len(data) == 0:
        raise ValueError("objective needs at least one observation")
    resid = data.ratings - model.predict(data)
    return float(np.mean(resid**2) + lam * penalty(model))


def rmse(model: TwoTowerModel, data: ObservationSet) -> float:
    if len(data) == 0:
        raise ValueError("rmse needs at least one observation")
    return float(np.sqrt(np.mean((data.ratings - model.predict(data)) ** 2)))


def _step(model: TwoTowerModel, xu: np.ndarray, xi: np.ndarray, k: np.ndarray, lr: float, lam: float) -> None:
    cu = forward_cache(model.user_tower, xu)
    ci = forward_cache(model.item_tower, xi)
    eu, ei = cu[0][-1], ci[0][-1]
    resid = k - np.einsum("nk,nk->n", eu, ei)
    coef = (-2.0 / k.size) * resid[:, None]
    for net, cache, other in ((model.user_tower, cu, ei), (model.item_tower, ci, eu)):
        grads = backward_arrays(net, cache, coef * other)
        for p, (dw, db) in zip(net.layers, grads):
            p.weights -= lr * (dw + 2.0 * lam * p.weights)
            p.bias -= lr * (db + 2.0 * lam * p.bias)


def sgd_step(model: TwoTowerModel, minibatch: ObservationSet, lr: float, lam: float) -> TwoTowerModel:
    """One in-place gradient step on the minibatch objective; returns ``model``."""
    if len(minibatch) == 0:
        raise ValueError("empty minibatch")
    _step(
        model,
        minibatch.user_covariates[minibatch.users],
        minibatch.item_covariates[minibatch.items],
        minibatch.ratings,
        lr,
        lam,
    )
    return model


def train(
    model: TwoTowerModel, train_set: ObservationSet, val_set: ObservationSet, cfg: TrainConfig
) -> tuple[TwoTowerModel, list[dict]]:
    """Minibatch SGD with per-epoch learning-rate decay and early stopping.

    ``model`` is not modified. Returns the parameters of the epoch with the
    lowest validation RMSE (earliest on ties) and the per-epoch history.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be non-empty")
    overlap = np.intersect1d(train_set.pair_keys(), val_set.pair_keys())
    if overlap.size:
        raise ValueError(f"train and validation share {overlap.size} (user, item) pairs")

    rng = np.random.default_rng(cfg.seed)
    current = model.copy()
    xu_all = train_set.user_covariates[train_set.users]
    xi_all = train_set.item_covariates[train_set.items]
    k_all = train_set.ratings
    n = len(train_set)

    best, best_rmse, stale = current.copy(), np.inf, 0
    history: list[dict] = []
    for epoch in range(cfg.max_epochs):
        lr = cfg.learning_rate(epoch)
        order = rng.permutation(n)
        # overflow inside a diverging epoch is reported below, not warned about
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                _step(current, xu_all[idx], xi_all[idx], k_all[idx], lr, cfg.lam)
            val_rmse = rmse(current, val_set)
        if not np.isfinite(val_rmse):
            raise FloatingPointError(f"training diverged at epoch {epoch}")
        history.append(
            {
                "epoch": epoch,
                "train_objective": objective(current, train_set, cfg.lam),
                "val_rmse": val_rmse,
                "lr": lr,
            }
        )
        if val_rmse < best_rmse:
            best, best_rmse, stale = current.copy(), val_rmse, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    _logger.debug("stopped after %d epochs, best val rmse %.4f", len(history), best_rmse)
    return best, history
