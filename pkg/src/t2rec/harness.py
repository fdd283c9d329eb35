"""Synthetic-benchmark protocol: split, tune, fit, score, replicate, tabulate.

Seeds: replication ``r`` of a scenario uses ``seed = base_seed + r`` for data
generation; every other random choice inside that replication draws from
``default_rng([seed, offset])`` with the offsets in ``SEED_OFFSETS``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Protocol, Sequence

import numpy as np

from .baselines import fit_cocluster, fit_knn, fit_rsvd, fit_svdpp
from .data import ObservationSet
from .synthgen import SyntheticSpec, generate
from .twotower import TrainConfig, TwoTowerModel, init_two_tower, train

_logger = logging.getLogger(__name__)

METHODS = ("t2rec", "rsvd", "svdpp", "cocluster", "knn")
SEED_OFFSETS = {"split": 101, "validation": 102, "init": 103, "cv": 104, "baseline_fit": 105}


def default_lambda_grid() -> list[float]:
    return [10.0 ** (-6 + k / 3) for k in range(25)]


def default_k_grid() -> list[int]:
    return list(range(5, 55, 5))


def sub_seed(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, SEED_OFFSETS[name]])


@dataclass(frozen=True)
class Scenario:
    n_users: int
    n_items: int
    d: int

    def label(self) -> str:
        return f"({self.n_users},{self.n_items}), d={self.d}"


@dataclass
class ExperimentConfig:
    spec: SyntheticSpec = field(default_factory=SyntheticSpec)
    methods: tuple[str, ...] = METHODS
    replications: int = 50
    split_ratio: float = 0.7
    val_fraction: float = 0.2
    lambda_grid: list[float] = field(default_factory=default_lambda_grid)
    k_grid: list[int] = field(default_factory=default_k_grid)
    base_seed: int = 0
    folds: int = 5
    hidden: int = 50
    n_layers: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)
    scenarios: list[Scenario] = field(default_factory=list)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {sorted(unknown)}")
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie in (0, 1)")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        if not self.lambda_grid or not self.k_grid:
            raise ValueError("lambda_grid and k_grid must be nonempty")
        if any(v < 0 for v in self.lambda_grid) or any(k < 1 for k in self.k_grid):
            raise ValueError("lambda values must be >= 0 and k values >= 1")
        if self.replications < 1 or self.folds < 2:
            raise ValueError("need replications >= 1 and folds >= 2")
        self.spec.validate()

    def scenario_list(self) -> list[Scenario]:
        if self.scenarios:
            return list(self.scenarios)
        return [Scenario(self.spec.n_users, self.spec.n_items, self.spec.d)]

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["spec"] = self.spec.to_dict()
        out["methods"] = list(self.methods)
        out["train"] = self.train.to_dict()
        out["scenarios"] = [asdict(s) for s in self.scenarios]
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown ExperimentConfig fields: {sorted(unknown)}")
        kw = dict(doc)
        if "spec" in kw:
            kw["spec"] = SyntheticSpec.from_dict(kw["spec"])
        if "train" in kw:
            kw["train"] = TrainConfig.from_dict(kw["train"])
        if "scenarios" in kw:
            kw["scenarios"] = [Scenario(**s) for s in kw["scenarios"]]
        return cls(**kw)


# --------------------------------------------------------------------------- splitting and scoring


def split(data: ObservationSet, ratio: float, seed) -> tuple[ObservationSet, ObservationSet]:
    """Uniform random partition of the ratings; ``floor(ratio * n)`` go to the first side."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    n = len(data)
    n_first = int(math.floor(ratio * n))
    if n_first == 0 or n_first == n:
        raise ValueError(f"splitting {n} ratings at {ratio} leaves one side empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(n)
    return data.subset(np.sort(order[:n_first])), data.subset(np.sort(order[n_first:]))


class Predictor(Protocol):
    def predict(self, data: ObservationSet) -> np.ndarray: ...


def evaluate_rmse(model, test: ObservationSet) -> float:
    """Root mean squared error of ``model`` (a ``.predict`` object or a callable) on ``test``."""
    if len(test) == 0:
        raise ValueError("cannot score an empty test set")
    pred = model.predict(test) if hasattr(model, "predict") else model(test)
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != test.ratings.shape:
        raise ValueError(f"predictor returned shape {pred.shape}, expected {test.ratings.shape}")
    return float(np.sqrt(np.mean((test.ratings - pred) ** 2)))


def _argmin_prefer_smaller(grid: Sequence[float], scores: Sequence[float]) -> int:
    """Index of the lowest score; ties go to the smaller grid value. NaN never wins."""
    best = None
    for idx, (g, s) in enumerate(zip(grid, scores)):
        if not np.isfinite(s):
            continue
        if best is None or s < scores[best] or (s == scores[best] and g < grid[best]):
            best = idx
    if best is None:
        raise RuntimeError("every grid point failed")
    return best


# --------------------------------------------------------------------------- two-tower tuning

# (train_part, val_part, lam, seed) -> (model, validation rmse)
Trainer = Callable[[ObservationSet, ObservationSet, float, int], tuple[object, float]]


def default_trainer(cfg: ExperimentConfig) -> Trainer:
    def run(train_part, val_part, lam, seed):
        init_seed = int(sub_seed(seed, "init").integers(2**31))
        model = init_two_tower(
            train_part.user_covariates.shape[1],
            train_part.item_covariates.shape[1],
            embed_dim=cfg.spec.p,
            hidden=cfg.hidden,
            n_layers=cfg.n_layers,
            seed=init_seed,
        )
        tc = replace(cfg.train, lam=lam, seed=init_seed + 1)
        best, history = train(model, train_part, val_part, tc)
        return best, min(h["val_rmse"] for h in history)

    return run


@dataclass
class TuneResult:
    best_value: float
    model: object
    scores: list[float]  # validation RMSE (t2rec) or mean CV RMSE per grid point; nan = failed


def tune_t2rec(
    train_set: ObservationSet,
    lambda_grid: Sequence[float],
    cfg: ExperimentConfig,
    seed: int = 0,
    trainer: Trainer | None = None,
) -> TuneResult:
    """Hold out ``val_fraction`` of ``train_set`` and pick the lambda with the lowest validation RMSE."""
    if not lambda_grid:
        raise ValueError("lambda grid is empty")
    trainer = trainer or default_trainer(cfg)
    val_part, fit_part = split(train_set, cfg.val_fraction, sub_seed(seed, "validation"))
    models, scores = [], []
    for lam in lambda_grid:
        try:
            model, score = trainer(fit_part, val_part, float(lam), seed)
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            _logger.warning("lambda=%g failed: %s", lam, exc)
            model, score = None, float("nan")
        models.append(model)
        scores.append(float(score))
    best = _argmin_prefer_smaller(list(lambda_grid), scores)
    return TuneResult(float(lambda_grid[best]), models[best], scores)


# --------------------------------------------------------------------------- baselines


class BaselineMethod(Protocol):
    name: str

    def grid(self, cfg: ExperimentConfig) -> list: ...

    def fit(self, data: ObservationSet, value, seed: int): ...

    def fold_scores(self, fit_part: ObservationSet, held: ObservationSet, grid: list, seed: int) -> list[float]: ...


class _GridLoop:
    """Scores each grid value by fitting once per value."""

    def fold_scores(self, fit_part, held, grid, seed):
        return [evaluate_rmse(self.fit(fit_part, v, seed), held) for v in grid]


class RsvdMethod(_GridLoop):
    name = "rsvd"

    def __init__(self, rank: int = 30, iters: int = 30):
        self.rank, self.iters = rank, iters

    def grid(self, cfg):
        return list(cfg.lambda_grid)

    def fit(self, data, value, seed):
        return fit_rsvd(data, rank=self.rank, reg=float(value), iters=self.iters, seed=seed)


class SvdPpMethod(_GridLoop):
    name = "svdpp"

    def __init__(self, rank: int = 30, reg: float = 0.02, lr: float = 5e-3, epochs: int = 20):
        self.rank, self.reg, self.lr, self.epochs = rank, reg, lr, epochs

    def grid(self, cfg):
        return [self.reg]

    def fit(self, data, value, seed):
        return fit_svdpp(data, rank=self.rank, reg=float(value), lr=self.lr, epochs=self.epochs, seed=seed)


class CoClusterMethod(_GridLoop):
    name = "cocluster"

    def __init__(self, iters: int = 20):
        self.iters = iters

    def grid(self, cfg):
        return list(cfg.k_grid)

    def fit(self, data, value, seed):
        k = int(value)
        return fit_cocluster(data, min(k, data.n_users), min(k, data.n_items), iters=self.iters, seed=seed)


class KnnMethod:
    name = "knn"

    def __init__(self, mode: str = "user_based"):
        self.mode = mode

    def grid(self, cfg):
        return list(cfg.k_grid)

    def fit(self, data, value, seed):
        return fit_knn(data, self.mode, int(value))

    def fold_scores(self, fit_part, held, grid, seed):
        # neighbour sets are nested in k, so one similarity pass serves the whole grid
        model = fit_knn(fit_part, self.mode, int(max(grid)))
        preds = model.predict_pairs_multi_k(held.users, held.items, [int(k) for k in grid])
        return [float(np.sqrt(np.mean((held.ratings - p) ** 2))) for p in preds]


def baseline_methods() -> dict[str, BaselineMethod]:
    return {m.name: m for m in (RsvdMethod(), SvdPpMethod(), CoClusterMethod(), KnnMethod())}


def kfold_indices(n: int, folds: int, seed) -> list[np.ndarray]:
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise ValueError(f"{n} ratings cannot fill {folds} folds")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return [np.sort(part) for part in np.array_split(rng.permutation(n), folds)]


def tune_baseline_cv(
    train_set: ObservationSet,
    method: BaselineMethod,
    grid: Sequence,
    folds: int = 5,
    seed: int = 0,
) -> tuple[object, list[float]]:
    """Rating-level k-fold CV; returns the grid value with the lowest mean held-out RMSE."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid is empty")
    if len(grid) == 1:
        return grid[0], [float("nan")]
    parts = kfold_indices(len(train_set), folds, sub_seed(seed, "cv"))
    totals = np.zeros(len(grid))
    everything = np.arange(len(train_set))
    for held_idx in parts:
        fit_idx = np.setdiff1d(everything, held_idx, assume_unique=True)
        totals += method.fold_scores(train_set.subset(fit_idx), train_set.subset(held_idx), grid, seed)
    means = list(totals / folds)
    return grid[_argmin_prefer_smaller(grid, means)], means


# --------------------------------------------------------------------------- replication and tables


@dataclass
class CellResult:
    scenario: Scenario
    method: str
    replication: int
    rmse: float  # nan when failed
    chosen: float | None = None
    error: str | None = None


def _fit_method(method: str, train_set, cfg: ExperimentConfig, seed: int):
    if method == "t2rec":
        res = tune_t2rec(train_set, cfg.lambda_grid, cfg, seed)
        return res.model, res.best_value
    m = baseline_methods()[method]
    best, _ = tune_baseline_cv(train_set, m, m.grid(cfg), cfg.folds, seed)
    fit_seed = int(sub_seed(seed, "baseline_fit").integers(2**31))
    return m.fit(train_set, best, fit_seed), best


def run_replication(cfg: ExperimentConfig, scenario: Scenario, r: int) -> list[CellResult]:
    seed = cfg.base_seed + r
    spec = replace(cfg.spec, n_users=scenario.n_users, n_items=scenario.n_items, d=scenario.d, seed=seed)
    data, _ = generate(spec)
    train_set, test_set = split(data, cfg.split_ratio, sub_seed(seed, "split"))
    out = []
    for method in cfg.methods:
        try:
            model, chosen = _fit_method(method, train_set, cfg, seed)
            out.append(CellResult(scenario, method, r, evaluate_rmse(model, test_set), float(chosen)))
        except Exception as exc:  # a failed cell is recorded and the run continues
            _logger.error("%s %s rep %d failed: %s", scenario.label(), method, r, exc)
            msg = f"{type(exc).__name__}: {exc}"
            _logger.debug("%s", traceback.format_exc())
            out.append(CellResult(scenario, method, r, float("nan"), None, msg))
    return out


@dataclass(frozen=True)
class ResultRow:
    scenario_n: int
    scenario_m: int
    d: int
    method: str
    rmse_mean: float
    rmse_se: float
    replications: int  # successful replications
    failed: int = 0


CSV_HEADER = ("scenario_n", "scenario_m", "d", "method", "rmse_mean", "rmse_se", "replications")


def aggregate(cells: Sequence[CellResult], methods: Sequence[str], scenarios: Sequence[Scenario]) -> list[ResultRow]:
    rows = []
    for sc in scenarios:
        for method in methods:
            vals = np.array([c.rmse for c in cells if c.scenario == sc and c.method == method])
            ok = vals[np.isfinite(vals)]
            n_fail = int(vals.size - ok.size)
            if ok.size == 0:
                mean, se = float("nan"), float("nan")
            else:
                mean = float(ok.mean())
                se = float(ok.std(ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else 0.0
            rows.append(ResultRow(sc.n_users, sc.n_items, sc.d, method, mean, se, int(ok.size), n_fail))
    return rows


@dataclass
class ResultTable:
    rows: list[ResultRow]
    cells: list[CellResult] = field(default_factory=list)

    def get(self, method: str, d: int | None = None, n: int | None = None) -> ResultRow:
        for row in self.rows:
            if row.method == method and (d is None or row.d == d) and (n is None or row.scenario_n == n):
                return row
        raise KeyError((method, d, n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.scenario_n, r.scenario_m, r.d, r.method, repr(r.rmse_mean), repr(r.rmse_se), r.replications])
        return buf.getvalue()

    def cells_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("scenario_n", "scenario_m", "d", "method", "replication", "rmse", "chosen", "error"))
        for c in self.cells:
            w.writerow([
                c.scenario.n_users, c.scenario.n_items, c.scenario.d, c.method, c.replication,
                repr(c.rmse), "" if c.chosen is None else repr(c.chosen), c.error or "",
            ])
        return buf.getvalue()

    def to_text(self) -> str:
        """Scenarios as rows, one ``RMSE  SE`` column pair per method; failed cells shown as ``failed``."""
        methods = list(dict.fromkeys(r.method for r in self.rows))
        keys = list(dict.fromkeys((r.scenario_n, r.scenario_m, r.d) for r in self.rows))
        labels = {k: f"({k[0]},{k[1]}), {k[2]}" for k in keys}
        w = max([len("size, d")] + [len(v) for v in labels.values()])
        lines = [" | ".join(["size, d".ljust(w)] + [f"{m:>17}" for m in methods])]
        lines.append(" | ".join([" " * w] + [f"{'RMSE':>8} {'SE':>8}" for _ in methods]))
        lines.append("-" * len(lines[0]))
        for key in keys:
            parts = [labels[key].ljust(w)]
            for meth in methods:
                row = next(r for r in self.rows if (r.scenario_n, r.scenario_m, r.d) == key and r.method == meth)
                parts.append(f"{'failed':>17}" if row.replications == 0 else f"{row.rmse_mean:8.3f} {row.rmse_se:8.3f}")
            lines.append(" | ".join(parts))
        return "\n".join(lines) + "\n"


def run_scenario(
    cfg: ExperimentConfig,
    scenario: Scenario | None = None,
    jobs: int = 1,
    progress: Callable[[CellResult], None] | None = None,
) -> ResultTable:
    """All replications of one scenario (or of every configured scenario when ``None``)."""
    scenarios = [scenario] if scenario is not None else cfg.scenario_list()
    tasks = [(sc, r) for sc in scenarios for r in range(cfg.replications)]
    cells: list[CellResult] = []
    if jobs <= 1:
        for sc, r in tasks:
            batch = run_replication(cfg, sc, r)
            cells.extend(batch)
            if progress:
                for c in batch:
                    progress(c)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_replication, cfg, sc, r) for sc, r in tasks]
            for fut in futures:
                batch = fut.result()
                cells.extend(batch)
                if progress:
                    for c in batch:
                        progress(c)
    # deterministic order regardless of completion order
    cells.sort(key=lambda c: (scenarios.index(c.scenario), cfg.methods.index(c.method), c.replication))
    return ResultTable(aggregate(cells, cfg.methods, scenarios), cells)
