import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_observations
from t2rec.data import ObservationSet
from t2rec.harness import (
    CSV_HEADER,
    CellResult,
    ExperimentConfig,
    Scenario,
    aggregate,
    evaluate_rmse,
    kfold_indices,
    default_k_grid,
    default_lambda_grid,
    run_replication,
    run_scenario,
    split,
    sub_seed,
    tune_baseline_cv,
    tune_t2rec,
)
from t2rec.synthgen import SyntheticSpec
from t2rec.twotower import TrainConfig


def keyset(data):
    return {(int(u), int(i), float(r)) for u, i, r in zip(data.users, data.items, data.ratings)}


def tiny_cfg(**kw):
    base = dict(
        spec=SyntheticSpec(n_users=20, n_items=20, D_u=4, D_i=4, p=2, d=2, n_ratings=150),
        replications=2,
        lambda_grid=[1e-4, 1e-2],
        k_grid=[2, 5],
        folds=3,
        hidden=6,
        n_layers=2,
        train=TrainConfig(max_epochs=5, patience=2, batch_size=32),
    )
    base.update(kw)
    return ExperimentConfig(**base)


# --------------------------------------------------------------------------- split


def test_split_floor_rule(rng):
    data = random_observations(rng, n_ratings=10)
    tr, te = split(data, 0.7, 0)
    assert (len(tr), len(te)) == (7, 3)


def test_split_deterministic(rng):
    data = random_observations(rng)
    a, b = split(data, 0.7, 42), split(data, 0.7, 42)
    assert all(np.array_equal(x.users, y.users) and np.array_equal(x.ratings, y.ratings) for x, y in zip(a, b))


@given(seed=st.integers(0, 10**6), ratio=st.floats(0.1, 0.9), n=st.integers(10, 80))
def test_split_is_partition(seed, ratio, n):
    data = random_observations(np.random.default_rng(seed), n_ratings=n)
    tr, te = split(data, ratio, seed)
    assert keyset(tr) | keyset(te) == keyset(data)
    assert not keyset(tr) & keyset(te)
    assert len(tr) == math.floor(ratio * n)
    assert tr.user_covariates is data.user_covariates


def test_split_errors(rng):
    data = random_observations(rng, n_ratings=2)
    with pytest.raises(ValueError):
        split(data, 0.3, 0)
    with pytest.raises(ValueError):
        split(data, 1.0, 0)


# --------------------------------------------------------------------------- grids and tuning


def test_grid_endpoints():
    grid = default_lambda_grid()
    assert len(grid) == 25
    assert grid[0] == pytest.approx(1e-6, rel=1e-12)
    assert grid[-1] == pytest.approx(1e2, rel=1e-12)
    assert default_k_grid() == [5, 10, 15, 20, 25, 30, 35, 40, 45, 50]


def test_stub_trainer_picks_nearest_lambda(rng):
    data = random_observations(rng)
    grid = default_lambda_grid()
    res = tune_t2rec(data, grid, tiny_cfg(), trainer=lambda f, v, lam, s: (lam, abs(lam - 1e-3)))
    assert res.best_value == min(grid, key=lambda g: abs(g - 1e-3))
    assert res.model == res.best_value


def test_validation_fraction(rng):
    data = random_observations(rng, n_ratings=50)
    seen = []

    def trainer(fit, val, lam, seed):
        seen.append((len(fit), len(val), keyset(fit) | keyset(val) == keyset(data)))
        return None, 0.0

    tune_t2rec(data, [0.1], tiny_cfg(), trainer=trainer)
    assert seen == [(40, 10, True)]


def test_single_value_grid_and_ties(rng):
    data = random_observations(rng)
    assert tune_t2rec(data, [0.5], tiny_cfg(), trainer=lambda *a: (None, 9.0)).best_value == 0.5
    assert tune_t2rec(data, [1.0, 0.1, 10.0], tiny_cfg(), trainer=lambda *a: (None, 1.0)).best_value == 0.1


def test_failed_points_skipped_and_all_failed(rng):
    data = random_observations(rng)

    def trainer(f, v, lam, s):
        if lam > 1:
            raise FloatingPointError("diverged")
        return None, 1.0 / (1 + lam)

    res = tune_t2rec(data, [0.1, 1.0, 100.0], tiny_cfg(), trainer=trainer)
    assert res.best_value == 1.0 and math.isnan(res.scores[2])
    with pytest.raises(RuntimeError):
        tune_t2rec(data, [5.0, 50.0], tiny_cfg(), trainer=trainer)


class ConstantMethod:
    """Predicts the grid value everywhere; CV should pick the value nearest the held-out mean."""

    name = "const"

    def grid(self, cfg):
        return [0.0, 1.0, 2.0, 3.0]

    def fit(self, data, value, seed):
        return lambda d: np.full(len(d), float(value))

    def fold_scores(self, fit_part, held, grid, seed):
        return [evaluate_rmse(self.fit(fit_part, v, seed), held) for v in grid]


def test_cv_selects_stub_optimum(rng):
    data = random_observations(rng, n_ratings=60)
    data = ObservationSet(data.users, data.items, 2.1 + 0.01 * rng.normal(size=60), data.user_covariates, data.item_covariates)
    best, means = tune_baseline_cv(data, ConstantMethod(), [0.0, 1.0, 2.0, 3.0], folds=5, seed=0)
    assert best == 2.0 and len(means) == 4


def test_cv_ties_prefer_smaller(rng):
    data = random_observations(rng)
    m = ConstantMethod()
    m.fold_scores = lambda *a: [1.0, 1.0, 1.0]
    assert tune_baseline_cv(data, m, [30, 10, 20])[0] == 10


def test_cv_single_and_errors(rng):
    data = random_observations(rng, n_ratings=4)
    assert tune_baseline_cv(data, ConstantMethod(), [7.0])[0] == 7.0
    with pytest.raises(ValueError):
        tune_baseline_cv(data, ConstantMethod(), [1.0, 2.0], folds=5)
    with pytest.raises(ValueError):
        tune_baseline_cv(data, ConstantMethod(), [])


def test_kfold_partition():
    parts = kfold_indices(23, 5, 0)
    assert sorted(np.concatenate(parts).tolist()) == list(range(23))
    assert all(len(p) in (4, 5) for p in parts)


# --------------------------------------------------------------------------- scoring


def test_rmse_hand_values():
    data = ObservationSet([0, 1], [0, 0], [3.0, -3.0])
    assert evaluate_rmse(lambda d: np.zeros(len(d)), data) == 3.0
    assert evaluate_rmse(lambda d: d.ratings, data) == 0.0


@given(seed=st.integers(0, 10**6))
def test_rmse_two_pass_oracle(seed):
    rng = np.random.default_rng(seed)
    data = random_observations(rng, n_ratings=30)
    pred = rng.normal(size=30)
    total = 0.0
    for r, p in zip(data.ratings.tolist(), pred.tolist()):
        total += (r - p) ** 2
    assert evaluate_rmse(lambda d: pred, data) == pytest.approx(math.sqrt(total / 30), rel=1e-12)


def test_rmse_errors():
    with pytest.raises(ValueError):
        evaluate_rmse(lambda d: d.ratings, ObservationSet([], [], [], n_users=1, n_items=1))
    with pytest.raises(ValueError):
        evaluate_rmse(lambda d: np.zeros(3), ObservationSet([0], [0], [1.0]))


# --------------------------------------------------------------------------- aggregation and scenarios


def test_aggregate_se_formula():
    sc = Scenario(5, 5, 2)
    vals = [1.0, 2.0, 4.0, float("nan")]
    cells = [CellResult(sc, "rsvd", r, v) for r, v in enumerate(vals)]
    (row,) = aggregate(cells, ["rsvd"], [sc])
    assert row.rmse_mean == pytest.approx(7 / 3)
    assert row.rmse_se == pytest.approx(np.std([1, 2, 4], ddof=1) / math.sqrt(3))
    assert (row.replications, row.failed) == (3, 1)
    (single,) = aggregate(cells[:1], ["rsvd"], [sc])
    assert single.rmse_se == 0.0


@pytest.fixture(scope="module")
def small_table():
    return run_scenario(tiny_cfg())


def test_run_scenario_layout(small_table):
    cfg = tiny_cfg()
    assert len(small_table.rows) == 5
    assert len(small_table.cells) == 5 * cfg.replications
    csv = small_table.to_csv().splitlines()
    assert csv[0] == ",".join(CSV_HEADER) and len(csv) == 6
    assert all(r.rmse_se >= 0 and r.replications == 2 for r in small_table.rows)
    text = small_table.to_text()
    assert "t2rec" in text and "(20,20), 2" in text


def test_replication_independence(small_table):
    """Replication r depends only on base_seed + r."""
    shifted = tiny_cfg(base_seed=1, replications=1)
    again = run_replication(shifted, Scenario(20, 20, 2), 0)
    for cell in again:
        original = next(c for c in small_table.cells if c.method == cell.method and c.replication == 1)
        assert cell.rmse == original.rmse and cell.chosen == original.chosen


def test_failed_cell_recorded(monkeypatch):
    import t2rec.harness as h

    real = h._fit_method

    def flaky(method, train_set, cfg, seed):
        if method == "svdpp":
            raise RuntimeError("nope")
        return real(method, train_set, cfg, seed)

    monkeypatch.setattr(h, "_fit_method", flaky)
    table = run_scenario(tiny_cfg(replications=1, methods=("svdpp", "knn")))
    row = table.get("svdpp")
    assert row.replications == 0 and row.failed == 1 and math.isnan(row.rmse_mean)
    assert "failed" in table.to_text()
    assert table.get("knn").replications == 1
    assert "RuntimeError: nope" in table.cells_csv()


def test_config_round_trip_and_validation():
    cfg = tiny_cfg(scenarios=[Scenario(20, 20, 2), Scenario(20, 20, 3)])
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert again.scenario_list()[1].d == 3
    with pytest.raises(ValueError):
        ExperimentConfig(methods=("nope",))
    with pytest.raises(ValueError):
        ExperimentConfig(split_ratio=1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(lambda_grid=[])
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_sub_seeds_are_distinct_streams():
    draws = {name: sub_seed(7, name).integers(2**31) for name in ("split", "validation", "init", "cv", "baseline_fit")}
    assert len(set(draws.values())) == 5
    assert sub_seed(7, "split").integers(2**31) == draws["split"]
