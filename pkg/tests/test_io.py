import os

import numpy as np
import pytest

from conftest import random_observations
from t2rec import io as tio
from t2rec.twotower import TrainConfig, init_two_tower, score


def test_dataset_round_trip_exact(tmp_path, rng):
    data = random_observations(rng)
    data.ratings[0] = 0.1 + 0.2  # a value that needs all 17 digits
    tio.write_dataset(tmp_path, data)
    back = tio.read_dataset(tmp_path)
    assert np.array_equal(back.users, data.users) and np.array_equal(back.items, data.items)
    assert np.array_equal(back.ratings, data.ratings)
    assert np.array_equal(back.user_covariates, data.user_covariates)
    assert np.array_equal(back.item_covariates, data.item_covariates)
    assert (tmp_path / "ratings.csv").read_text().splitlines()[0] == "user_id,item_id,rating"
    assert (tmp_path / "item_covariates.csv").read_text().splitlines()[0] == "id,c1,c2,c3,c4"


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "x.txt"
    tio.atomic_write_text(target, "a")
    tio.atomic_write_text(target, "b")
    assert target.read_text() == "b"
    assert os.listdir(target.parent) == ["x.txt"]


def test_malformed_tables_rejected(tmp_path):
    (tmp_path / "r.csv").write_text("user,item,rating\n")
    with pytest.raises(ValueError, match="header"):
        tio.read_ratings(tmp_path / "r.csv")
    (tmp_path / "r.csv").write_text("user_id,item_id,rating\n0,x,1\n")
    with pytest.raises(ValueError, match="malformed"):
        tio.read_ratings(tmp_path / "r.csv")
    (tmp_path / "c.csv").write_text("id,c1\n0,1.0\n2,1.0\n")
    with pytest.raises(ValueError, match="ids"):
        tio.read_covariates(tmp_path / "c.csv")


def test_bundle_round_trip(tmp_path, rng):
    model = init_two_tower(3, 4, embed_dim=2, hidden=5, n_layers=3, seed=1)
    cfg = TrainConfig(lam=0.01, seed=9)
    hist = [{"epoch": 0, "val_rmse": 1.5}]
    tio.save_bundle(tmp_path / "m.json", model, cfg, hist)
    back, cfg2, hist2 = tio.load_bundle(tmp_path / "m.json")
    xu, xi = rng.normal(size=(7, 3)), rng.normal(size=(7, 4))
    assert np.array_equal(score(back, xu, xi), score(model, xu, xi))
    assert cfg2 == cfg and hist2 == hist
    doc = tio.read_json(tmp_path / "m.json")
    doc["format_version"] = 99
    with pytest.raises(ValueError, match="format_version"):
        tio.bundle_from_dict(doc)


def test_config_yaml_and_json(tmp_path):
    (tmp_path / "a.yaml").write_text("spec:\n  n_users: 10\n  d: 2\n")
    (tmp_path / "a.json").write_text('{"spec": {"n_users": 10, "d": 2}}')
    assert tio.read_config(tmp_path / "a.yaml") == tio.read_config(tmp_path / "a.json")
    (tmp_path / "b.json").write_text("[1, 2]")
    with pytest.raises(ValueError):
        tio.read_config(tmp_path / "b.json")
