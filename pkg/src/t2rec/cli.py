"""Command-line entry point: ``python -m t2rec <command> [options]``.

Every command writes one ``manifest.json`` into ``--out``. Failures print a
single line ``ERROR <CODE>: <message>`` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io as tio
from .harness import SEED_OFFSETS, ExperimentConfig, evaluate_rmse, run_scenario, split, sub_seed
from .synthgen import SyntheticSpec, generate
from .theory import BoundInputs, rate_report
from .theory.checks import run_all
from .twotower import init_two_tower, train

EXIT_CODES = {
    "E_VIOLATION": 1,
    "E_USAGE": 2,
    "E_CONFIG": 3,
    "E_IO": 4,
    "E_DATA": 5,
    "E_TRAIN": 6,
    "E_INTERNAL": 70,
}


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("E_USAGE", message)


def config_digest(doc: dict) -> str:
    """SHA-256 of the canonical (sorted-key, compact) JSON form; insensitive to field order."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _versions() -> dict:
    import numba
    import scipy

    return {
        "t2rec": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


class Run:
    """Collects outputs and writes the manifest once the command finishes."""

    def __init__(self, command: str, argv: list[str], out_dir: Path, config: dict | None, seeds: dict):
        self.command, self.argv, self.out_dir = command, argv, out_dir
        self.config, self.seeds = config, seeds
        self.started = _now()
        self.outputs: list[str] = []

    def write_text(self, name: str, text: str) -> Path:
        path = tio.atomic_write_text(self.out_dir / name, text)
        self.outputs.append(str(path))
        return path

    def write_json(self, name: str, doc) -> Path:
        return self.write_text(name, tio.dumps_json(doc))

    def finish(self, status: str = "ok") -> Path:
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "config_digest": None if self.config is None else config_digest(self.config),
            "seeds": self.seeds,
            "started_at": self.started,
            "finished_at": _now(),
            "outputs": self.outputs,
            "versions": _versions(),
            "status": status,
        }
        return tio.atomic_write_text(self.out_dir / "manifest.json", tio.dumps_json(manifest))


# --------------------------------------------------------------------------- config helpers


def _load_doc(path) -> dict:
    if path is None:
        raise CliError("E_USAGE", "--config is required for this command")
    try:
        return tio.read_config(path)
    except FileNotFoundError as exc:
        raise CliError("E_IO", f"config not found: {path}") from exc
    except (ValueError, json.JSONDecodeError) as exc:
        raise CliError("E_CONFIG", f"cannot parse {path}: {exc}") from exc
    except Exception as exc:  # yaml errors
        raise CliError("E_CONFIG", f"cannot parse {path}: {exc}") from exc


def _spec_from(doc: dict, seed: int | None) -> SyntheticSpec:
    body = doc.get("spec", doc)
    try:
        spec = SyntheticSpec.from_dict(body)
        if seed is not None:
            spec = replace(spec, seed=seed)
        spec.validate()
    except (TypeError, ValueError) as exc:
        raise CliError("E_CONFIG", str(exc)) from exc
    return spec


def _experiment_from(doc: dict, seed: int | None) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.from_dict(doc)
        if seed is not None:
            cfg.base_seed = seed
    except (TypeError, ValueError) as exc:
        raise CliError("E_CONFIG", str(exc)) from exc
    return cfg


def _read_data(path):
    if path is None:
        raise CliError("E_USAGE", "--data is required for this command")
    try:
        return tio.read_dataset(path)
    except FileNotFoundError as exc:
        raise CliError("E_IO", f"missing data file: {exc.filename}") from exc
    except ValueError as exc:
        raise CliError("E_DATA", str(exc)) from exc


# --------------------------------------------------------------------------- commands


def cmd_gen(args, argv) -> int:
    spec = _spec_from(_load_doc(args.config), args.seed)
    run = Run("gen", argv, args.out, {"spec": spec.to_dict()}, {"seed": spec.seed, "streams": "default_rng([seed, stream])"})
    data, gt = generate(spec)
    for path in tio.write_dataset(args.out, data):
        run.outputs.append(str(path))
    run.write_json(tio.GROUND_TRUTH_FILE, {"spec": spec.to_dict(), "ground_truth": gt.to_dict()})
    run.finish()
    print(f"wrote {len(data)} ratings to {args.out}")
    return 0


def cmd_train(args, argv) -> int:
    cfg = _experiment_from(_load_doc(args.config), args.seed)
    data = _read_data(args.data)
    if data.user_covariates is None or data.item_covariates is None:
        raise CliError("E_DATA", "training needs user and item covariate files")
    seed = cfg.base_seed
    init_seed = int(sub_seed(seed, "init").integers(2**31))
    tc = replace(cfg.train, seed=init_seed + 1)
    run = Run("train", argv, args.out, cfg.to_dict(), {"base_seed": seed, "offsets": SEED_OFFSETS, "init_seed": init_seed})
    try:
        val_part, fit_part = split(data, cfg.val_fraction, sub_seed(seed, "validation"))
        model = init_two_tower(
            data.user_covariates.shape[1], data.item_covariates.shape[1],
            embed_dim=cfg.spec.p, hidden=cfg.hidden, n_layers=cfg.n_layers, seed=init_seed,
        )
        best, history = train(model, fit_part, val_part, tc)
    except (ValueError, FloatingPointError) as exc:
        raise CliError("E_TRAIN", str(exc)) from exc
    run.write_text("model.json", tio.dumps_json(tio.bundle_dict(best, tc, history)))
    lines = ["epoch,train_objective,val_rmse,lr"]
    lines += [f"{h['epoch']},{h['train_objective']!r},{h['val_rmse']!r},{h['lr']!r}" for h in history]
    run.write_text("history.csv", "\n".join(lines) + "\n")
    run.finish()
    best_val = min(h["val_rmse"] for h in history)
    print(f"epochs {len(history)} best_val_rmse {best_val!r}")
    return 0


def cmd_eval(args, argv) -> int:
    if args.model is None:
        raise CliError("E_USAGE", "--model is required for eval")
    try:
        model, _, _ = tio.load_bundle(args.model)
    except FileNotFoundError as exc:
        raise CliError("E_IO", f"model not found: {args.model}") from exc
    except (KeyError, ValueError) as exc:
        raise CliError("E_DATA", f"bad model bundle: {exc}") from exc
    data = _read_data(args.data)
    try:
        value = evaluate_rmse(model, data)
    except ValueError as exc:
        raise CliError("E_DATA", str(exc)) from exc
    run = Run("eval", argv, args.out, None, {})
    run.write_json("eval.json", {"rmse": value, "n": len(data), "model": str(args.model), "data": str(args.data)})
    run.finish()
    print(f"rmse {value!r}")
    return 0


def cmd_sweep(args, argv) -> int:
    cfg = _experiment_from(_load_doc(args.config), args.seed)
    run = Run("sweep", argv, args.out, cfg.to_dict(), {"base_seed": cfg.base_seed, "offsets": SEED_OFFSETS, "replication_seed": "base_seed + r"})

    def progress(cell):
        logging.getLogger("t2rec.sweep").info(
            "%s %s rep %d rmse %.4f", cell.scenario.label(), cell.method, cell.replication, cell.rmse
        )

    table = run_scenario(cfg, None, jobs=args.jobs, progress=progress)
    run.write_text("results.csv", table.to_csv())
    run.write_text("results.txt", table.to_text())
    run.write_text("cells.csv", table.cells_csv())
    failed = sum(1 for c in table.cells if c.error)
    run.finish("ok" if failed == 0 else f"{failed} failed cells")
    sys.stdout.write(table.to_text())
    if failed:
        raise CliError("E_TRAIN", f"{failed} of {len(table.cells)} cells failed; see cells.csv")
    return 0


def cmd_bounds(args, argv) -> int:
    doc = _load_doc(args.config)
    body = doc.get("bounds", doc)
    try:
        inputs = BoundInputs.from_dict(body)
        report = rate_report(inputs)
    except (TypeError, ValueError, OverflowError) as exc:
        raise CliError("E_CONFIG", str(exc)) from exc
    run = Run("bounds", argv, args.out, {"bounds": inputs.to_dict()}, {})
    values = report.to_dict()
    run.write_json("bounds.json", values)
    flat = [(k, v) for k, v in values.items() if k != "inputs"]
    run.write_text("bounds.csv", "quantity,value\n" + "".join(f"{k},{v!r}\n" for k, v in flat))
    run.finish()
    for k, v in flat:
        print(f"{k} {v!r}")
    return 0


def cmd_theorycheck(args, argv) -> int:
    seed = 0 if args.seed is None else args.seed
    quick = bool(args.quick)
    run = Run("theorycheck", argv, args.out, {"quick": quick}, {"seed": seed})
    results = run_all(seed=seed, quick=quick)
    run.write_json("theorycheck.json", [r.to_dict() for r in results])
    bad = [r for r in results if not r.ok]
    run.finish("ok" if not bad else "violations")
    for r in results:
        print(f"{r.name} cases={r.cases} violations={r.violations} worst={r.worst!r} {'PASS' if r.ok else 'FAIL'}")
    if bad:
        raise CliError("E_VIOLATION", "property violations in: " + ", ".join(r.name for r in bad))
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
    "theorycheck": cmd_theorycheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="t2rec", description="Two-tower recommender experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON or YAML config document")
    parser.add_argument("--out", type=Path, default=Path("t2rec-out"), help="output directory")
    parser.add_argument("--seed", type=int, help="override the config's base seed")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent replications for sweep")
    parser.add_argument("--data", type=Path, help="dataset directory (train, eval)")
    parser.add_argument("--model", type=Path, help="model bundle (eval)")
    parser.add_argument("--quick", action="store_true", help="smaller theorycheck suites")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
        if args.jobs < 1:
            raise CliError("E_USAGE", "--jobs must be >= 1")
        try:
            args.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError("E_IO", f"cannot create output directory {args.out}: {exc.strerror}") from exc
        return COMMANDS[args.command](args, argv)
    except CliError as exc:
        msg = " ".join(str(exc).split())
        print(f"ERROR {exc.code}: {msg}", file=sys.stderr)
        return EXIT_CODES[exc.code]
    except OSError as exc:
        print(f"ERROR E_IO: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_CODES["E_IO"]
    except Exception as exc:  # last resort keeps the one-line contract
        print(f"ERROR E_INTERNAL: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_CODES["E_INTERNAL"]
