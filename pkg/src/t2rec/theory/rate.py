"""Empirical probe of how two-tower excess risk shrinks with the number of ratings."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..harness import ExperimentConfig, Trainer, evaluate_rmse, split, sub_seed, tune_t2rec
from ..synthgen import generate


@dataclass(frozen=True)
class RateCell:
    d: int
    omega: int
    replication: int
    seed: int
    test_mse: float
    excess_mse: float  # test MSE minus the generator's noise variance


@dataclass
class RateTable:
    cells: list[RateCell]
    slopes: dict[int, float | None]  # None marks a degenerate fit
    degenerate: dict[int, bool] = field(default_factory=dict)

    def mean_excess(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        omegas = sorted({c.omega for c in self.cells if c.d == d})
        means = [np.mean([c.excess_mse for c in self.cells if c.d == d and c.omega == o]) for o in omegas]
        return np.asarray(omegas, dtype=np.float64), np.asarray(means)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("d", "omega", "replication", "seed", "test_mse", "excess_mse"))
        for c in self.cells:
            w.writerow([c.d, c.omega, c.replication, c.seed, repr(c.test_mse), repr(c.excess_mse)])
        return buf.getvalue()

    def slopes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("d", "slope", "degenerate"))
        for d, s in self.slopes.items():
            w.writerow([d, "" if s is None else repr(s), int(self.degenerate.get(d, False))])
        return buf.getvalue()


def log_log_slope(omegas: Sequence[float], excess: Sequence[float], floor: float = 1e-3) -> float | None:
    """OLS slope of ``log excess`` on ``log omega``; ``None`` if any excess is below ``floor``."""
    x = np.log(np.asarray(omegas, dtype=np.float64))
    y = np.asarray(excess, dtype=np.float64)
    if np.any(~np.isfinite(y)) or np.any(y < floor):
        return None
    y = np.log(y)
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


class CellFailure(RuntimeError):
    pass


def _run_cell(cfg: ExperimentConfig, d: int, omega: int, rep: int, seed: int, trainer: Trainer | None) -> RateCell:
    try:
        spec = replace(cfg.spec, d=d, n_ratings=omega, seed=seed)
        data, _ = generate(spec)
        train_set, test_set = split(data, cfg.split_ratio, sub_seed(seed, "split"))
        model = tune_t2rec(train_set, cfg.lambda_grid, cfg, seed, trainer).model
        mse = evaluate_rmse(model, test_set) ** 2
    except Exception as exc:
        raise CellFailure(f"cell d={d} omega={omega} replication={rep} seed={seed}: {exc}") from exc
    return RateCell(d, omega, rep, seed, mse, mse - cfg.spec.noise_var)


def empirical_rate_experiment(
    cfg: ExperimentConfig,
    omega_grid: Sequence[int],
    d_values: Sequence[int],
    replications: int = 1,
    trainer: Trainer | None = None,
    jobs: int = 1,
    degenerate_floor: float = 1e-3,
) -> RateTable:
    """Train on ``omega`` ratings for every ``(d, omega)`` and fit the log-log decay per ``d``.

    Cell ``c`` (enumerated d-major, then omega, then replication) uses
    ``seed = cfg.base_seed + c``. A failing cell raises ``CellFailure`` naming it.
    """
    omega_grid = [int(o) for o in omega_grid]
    if len(omega_grid) < 4 or any(b <= a for a, b in zip(omega_grid, omega_grid[1:])):
        raise ValueError("omega_grid must be strictly increasing with at least 4 points")
    tasks = []
    for d in d_values:
        for omega in omega_grid:
            for rep in range(replications):
                tasks.append((int(d), omega, rep, cfg.base_seed + len(tasks)))
    if jobs <= 1:
        cells = [_run_cell(cfg, *t, trainer) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, *zip(*[(cfg, *t, trainer) for t in tasks])))

    table = RateTable(cells, {}, {})
    for d in d_values:
        omegas, means = table.mean_excess(int(d))
        slope = log_log_slope(omegas, means, degenerate_floor)
        table.slopes[int(d)] = slope
        table.degenerate[int(d)] = slope is None
    return table
