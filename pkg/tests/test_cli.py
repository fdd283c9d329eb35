import json
import subprocess
import sys

import numpy as np
import pytest

from t2rec import io as tio
from t2rec.cli import EXIT_CODES, config_digest, main
from t2rec.data import ObservationSet
from t2rec.nn import LayerParams, Mlp
from t2rec.twotower import TwoTowerModel

MINIMAL_SPEC = {"n_users": 10, "n_items": 10, "D_u": 4, "D_i": 4, "p": 2, "d": 2, "n_ratings": 20, "seed": 3}

TINY_EXPERIMENT = {
    "spec": {"n_users": 20, "n_items": 20, "D_u": 4, "D_i": 4, "p": 2, "d": 2, "n_ratings": 150},
    "replications": 1,
    "lambda_grid": [1e-3],
    "k_grid": [3],
    "folds": 3,
    "hidden": 6,
    "n_layers": 2,
    "train": {"max_epochs": 4, "patience": 2, "batch_size": 32},
}


def write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def data_files(out):
    return {name: (out / name).read_bytes() for name in ("ratings.csv", "user_covariates.csv", "item_covariates.csv", "ground_truth.json")}


def test_gen_writes_expected_files(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"spec": MINIMAL_SPEC})
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    out = tmp_path / "o"
    files = data_files(out)
    assert len(files) == 4 and (out / "manifest.json").exists()
    assert len((out / "ratings.csv").read_text().splitlines()) == 21


def test_gen_byte_identical(tmp_path):
    cfg = write(tmp_path / "c.json", MINIMAL_SPEC)
    for name in ("a", "b"):
        assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    assert data_files(tmp_path / "a") == data_files(tmp_path / "b")
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert data_files(tmp_path / "c")["ratings.csv"] != data_files(tmp_path / "a")["ratings.csv"]


def test_gen_rejects_d_above_D(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {**MINIMAL_SPEC, "d": 5})
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CODES["E_CONFIG"]
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("ERROR E_CONFIG:") and "1 <= d <= min(D_u, D_i)" in err[0]


def test_errors_are_single_line(tmp_path, capsys):
    assert main(["frobnicate"]) == EXIT_CODES["E_USAGE"]
    assert main(["gen", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_CODES["E_IO"]
    assert main(["eval", "--out", str(tmp_path)]) == EXIT_CODES["E_USAGE"]
    lines = capsys.readouterr().err.strip().splitlines()
    assert len(lines) == 3 and all(line.startswith("ERROR E_") for line in lines)


def test_train_history_deterministic_and_eval(tmp_path, capsys):
    gen_cfg = write(tmp_path / "g.json", {**TINY_EXPERIMENT["spec"], "seed": 1})
    assert main(["gen", "--config", str(gen_cfg), "--out", str(tmp_path / "data")]) == 0
    cfg = write(tmp_path / "t.json", TINY_EXPERIMENT)
    for name in ("r1", "r2"):
        assert main(["train", "--config", str(cfg), "--data", str(tmp_path / "data"), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "r1" / "history.csv").read_bytes() == (tmp_path / "r2" / "history.csv").read_bytes()
    assert (tmp_path / "r1" / "model.json").read_bytes() == (tmp_path / "r2" / "model.json").read_bytes()
    capsys.readouterr()
    assert main(["eval", "--model", str(tmp_path / "r1" / "model.json"), "--data", str(tmp_path / "data"), "--out", str(tmp_path / "e")]) == 0
    value = float(capsys.readouterr().out.split()[-1])
    assert value == tio.read_json(tmp_path / "e" / "eval.json")["rmse"] and value > 0


def test_eval_perfect_stub_model(tmp_path, capsys, rng):
    A, Bm = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
    xu, xi = rng.uniform(size=(6, 3)), rng.uniform(size=(5, 3))
    users, items = np.divmod(np.arange(30), 5)
    ratings = np.einsum("nk,nk->n", xu[users] @ A.T, xi[items] @ Bm.T)
    tio.write_dataset(tmp_path / "d", ObservationSet(users, items, ratings, xu, xi))
    stub = TwoTowerModel(Mlp([LayerParams(A, np.zeros(2))]), Mlp([LayerParams(Bm, np.zeros(2))]))
    tio.save_bundle(tmp_path / "m.json", stub)
    assert main(["eval", "--model", str(tmp_path / "m.json"), "--data", str(tmp_path / "d"), "--out", str(tmp_path / "o")]) == 0
    assert float(capsys.readouterr().out.split()[-1]) == pytest.approx(0.0, abs=1e-12)


def test_bounds_prints_exponent(tmp_path, capsys):
    doc = {"W": 10, "L": 3, "B": 1.0, "W_item": 10, "L_item": 3, "B_item": 1.0, "p": 4, "M": 1.0,
           "beta": 2.0, "d_u": 4, "d_i": 4, "omega_size": 10000}
    assert main(["bounds", "--config", str(write(tmp_path / "b.json", {"bounds": doc})), "--out", str(tmp_path / "o")]) == 0
    assert "rate_exponent 0.5" in capsys.readouterr().out.splitlines()
    assert (tmp_path / "o" / "bounds.csv").read_text().startswith("quantity,value\n")


def test_theorycheck_exit_codes(tmp_path, monkeypatch):
    assert main(["theorycheck", "--quick", "--out", str(tmp_path / "ok")]) == 0
    import t2rec.cli as cli
    from t2rec.theory.checks import SuiteResult

    monkeypatch.setattr(cli, "run_all", lambda seed, quick: [SuiteResult("fake", 1, 1, 2.0)])
    assert main(["theorycheck", "--out", str(tmp_path / "bad")]) == EXIT_CODES["E_VIOLATION"]
    assert tio.read_json(tmp_path / "bad" / "manifest.json")["status"] == "violations"


def test_sweep_row_count(tmp_path, capsys):
    cfg = write(tmp_path / "s.json", TINY_EXPERIMENT)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "results.csv").read_text().splitlines()
    assert rows[0] == "scenario_n,scenario_m,d,method,rmse_mean,rmse_se,replications"
    assert sorted(r.split(",")[3] for r in rows[1:]) == sorted(["t2rec", "rsvd", "svdpp", "cocluster", "knn"])


def test_manifest_digest_stable(tmp_path):
    a = {"x": 1, "y": {"b": 2, "a": [1, 2]}}
    b = {"y": {"a": [1, 2], "b": 2}, "x": 1}
    assert config_digest(a) == config_digest(b)
    write(tmp_path / "a.json", {"spec": MINIMAL_SPEC})
    write(tmp_path / "b.json", {"spec": dict(reversed(list(MINIMAL_SPEC.items())))})
    digests = []
    for name in ("a", "b"):
        main(["gen", "--config", str(tmp_path / f"{name}.json"), "--out", str(tmp_path / f"o{name}")])
        digests.append(tio.read_json(tmp_path / f"o{name}" / "manifest.json")["config_digest"])
    assert digests[0] == digests[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "t2rec", "nope"], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == EXIT_CODES["E_USAGE"]
    assert proc.stderr.startswith("ERROR E_USAGE:")
