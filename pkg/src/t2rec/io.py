"""File formats: rating/covariate CSV tables, JSON documents, config files, model bundles.

Floats are written with ``repr`` so every value round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .data import ObservationSet
from .nn import FORMAT_VERSION, Mlp
from .twotower import TrainConfig, TwoTowerModel

RATINGS_HEADER = ("user_id", "item_id", "rating")
RATINGS_FILE = "ratings.csv"
USER_COV_FILE = "user_covariates.csv"
ITEM_COV_FILE = "item_covariates.csv"
GROUND_TRUTH_FILE = "ground_truth.json"


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, doc) -> Path:
    return atomic_write_text(path, dumps_json(doc))


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_config(path) -> dict:
    """A JSON or YAML document (chosen by extension; ``.yaml``/``.yml`` use YAML)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError(f"config {path} must be a mapping at the top level")
    return doc


# --------------------------------------------------------------------------- tables


def ratings_csv(users, items, ratings) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATINGS_HEADER)
    for u, i, r in zip(np.asarray(users).tolist(), np.asarray(items).tolist(), np.asarray(ratings, dtype=float).tolist()):
        w.writerow((u, i, repr(r)))
    return buf.getvalue()


def covariates_csv(table: np.ndarray) -> str:
    table = np.asarray(table, dtype=np.float64)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + [f"c{j + 1}" for j in range(table.shape[1])])
    for idx, row in enumerate(table.tolist()):
        w.writerow([idx] + [repr(v) for v in row])
    return buf.getvalue()


def read_ratings(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != RATINGS_HEADER:
        raise ValueError(f"{path}: expected header {','.join(RATINGS_HEADER)}")
    body = [r for r in rows[1:] if r]
    try:
        users = np.array([int(r[0]) for r in body], dtype=np.int64)
        items = np.array([int(r[1]) for r in body], dtype=np.int64)
        ratings = np.array([float(r[2]) for r in body], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed rating row ({exc})") from exc
    return users, items, ratings


def read_covariates(path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][0].strip() != "id":
        raise ValueError(f"{path}: expected header id,c1,...,cD")
    width = len(rows[0]) - 1
    ids = np.array([int(r[0]) for r in rows[1:]], dtype=np.int64)
    if ids.size and not np.array_equal(np.sort(ids), np.arange(ids.size)):
        raise ValueError(f"{path}: ids must be exactly 0..N-1")
    table = np.empty((ids.size, width))
    for r in rows[1:]:
        if len(r) != width + 1:
            raise ValueError(f"{path}: row for id {r[0]} has {len(r) - 1} values, expected {width}")
        table[int(r[0])] = [float(v) for v in r[1:]]
    return table


def write_dataset(out_dir, data: ObservationSet) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [atomic_write_text(out_dir / RATINGS_FILE, ratings_csv(data.users, data.items, data.ratings))]
    if data.user_covariates is not None:
        paths.append(atomic_write_text(out_dir / USER_COV_FILE, covariates_csv(data.user_covariates)))
    if data.item_covariates is not None:
        paths.append(atomic_write_text(out_dir / ITEM_COV_FILE, covariates_csv(data.item_covariates)))
    return paths


def read_dataset(data_dir) -> ObservationSet:
    """Ratings plus covariate tables from a directory written by ``write_dataset``."""
    data_dir = Path(data_dir)
    users, items, ratings = read_ratings(data_dir / RATINGS_FILE)
    ucov = read_covariates(data_dir / USER_COV_FILE) if (data_dir / USER_COV_FILE).exists() else None
    icov = read_covariates(data_dir / ITEM_COV_FILE) if (data_dir / ITEM_COV_FILE).exists() else None
    return ObservationSet(users, items, ratings, ucov, icov)


# --------------------------------------------------------------------------- model bundles


def bundle_dict(model: TwoTowerModel, cfg: TrainConfig | None = None, history: list[dict] | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "embed_dim": model.embed_dim,
        "user_tower": model.user_tower.to_dict(),
        "item_tower": model.item_tower.to_dict(),
        "train_config": None if cfg is None else cfg.to_dict(),
        "history": history or [],
    }


def bundle_from_dict(doc: dict) -> tuple[TwoTowerModel, TrainConfig | None, list[dict]]:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported bundle format_version {doc.get('format_version')!r}")
    model = TwoTowerModel(Mlp.from_dict(doc["user_tower"]), Mlp.from_dict(doc["item_tower"]))
    if model.embed_dim != doc["embed_dim"]:
        raise ValueError("bundle embed_dim disagrees with its towers")
    cfg = None if doc.get("train_config") is None else TrainConfig.from_dict(doc["train_config"])
    return model, cfg, list(doc.get("history", []))


def save_bundle(path, model: TwoTowerModel, cfg: TrainConfig | None = None, history=None) -> Path:
    return write_json(path, bundle_dict(model, cfg, history))


def load_bundle(path):
    return bundle_from_dict(read_json(path))
