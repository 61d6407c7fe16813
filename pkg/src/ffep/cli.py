"""Command-line front end: run experiments, compute references, merge reports.

Subcommands:

* ``ffep run`` - execute a RunConfig (traces, timing table, manifest).
* ``ffep reference`` - offline minimizers only, written as references.json.
* ``ffep report`` - aggregate timing tables found under a results directory.

Run configs are JSON; every field has a default aimed at the bundled
synthetic dataset, and the flags --scheme, --loss, --batch-size, --sweeps,
--mode, --seed and --out override the file.  Exit codes: 0 success, 1 usage
error, 2 data error, 3 at least one run failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .bench import (
    RunConfig,
    reference_newton_logistic,
    reference_powell,
    run_experiment,
    total_cost,
)
from .factors import PriorFactor
from .ingest import (
    ColumnSchema,
    DataLoadError,
    bundled_synthetic_path,
    bundled_synthetic_schema,
    load_csv,
    preprocess,
)
from .losses import loss_from_name
from .schemes import scheme_from_name

__all__ = ["main"]

_USAGE_ERROR = 1
_DATA_ERROR = 2
_RUNS_FAILED = 3

_DEFAULTS = {
    "losses": ["logistic", "hinge", "quasi01"],
    "epsilon": 0.1,
    "schemes": ["la", "qla", "gq", "vq"],
    "batch_size": 10,
    "sweeps": None,
    "mode": "looping",
    "beta": 1.0,
    "prior_variance": 25.0,
    "seed": None,
    "out": "results",
    "timing_repetitions": 3,
    "cost_every": 1,
    "references": True,
    "gamma": None,
    "newton_tol": 1e-5,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; our contract reserves 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_USAGE_ERROR, f"{self.prog}: error: {message}\n")


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="ffep", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p):
        p.add_argument("--config", help="JSON run-config file")
        p.add_argument("--loss", action="append",
                       help="loss name (repeatable or comma-separated)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    run = sub.add_parser("run", help="execute an experiment config")
    add_common(run)
    run.add_argument("--scheme", action="append",
                     help="scheme name (repeatable or comma-separated)")
    run.add_argument("--batch-size", type=int)
    run.add_argument("--sweeps", type=int)
    run.add_argument("--mode", choices=["looping", "streaming"])

    ref = sub.add_parser("reference", help="compute offline minimizers only")
    add_common(ref)

    rep = sub.add_parser("report", help="aggregate timing tables")
    rep.add_argument("--out", required=True,
                     help="results directory to scan for timing.csv files")
    return parser


def _split_names(values):
    names = []
    for v in values:
        names.extend(s.strip() for s in v.split(",") if s.strip())
    return names


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise _UsageError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise _UsageError(f"config file is not valid JSON: {exc}") from exc


def _resolve_dataset(cfg: dict):
    """Dataset path + schema from a config's ``dataset`` section (or the bundled one)."""
    section = cfg.get("dataset")
    if section is None:
        return bundled_synthetic_path(), bundled_synthetic_schema(), "synthetic306"
    try:
        path = section["path"]
        if path == "bundled:synthetic":
            path = bundled_synthetic_path()
        schema = ColumnSchema(
            label=section["label"],
            label_map={str(k): int(v) for k, v in section["label_map"].items()},
            numeric=tuple(section.get("numeric", ())),
            categorical=tuple(section.get("categorical", ())),
            has_header=bool(section.get("has_header", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise _UsageError(f"bad dataset section in config: {exc}") from exc
    name = section.get("name") or Path(str(path)).stem
    return path, schema, name


def _merged_settings(args, cfg: dict) -> dict:
    settings = dict(_DEFAULTS)
    unknown = set(cfg) - set(_DEFAULTS) - {"dataset"}
    if unknown:
        raise _UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    settings.update(cfg)
    if args.loss:
        settings["losses"] = _split_names(args.loss)
    if getattr(args, "scheme", None):
        settings["schemes"] = _split_names(args.scheme)
    if getattr(args, "batch_size", None) is not None:
        settings["batch_size"] = args.batch_size
    if getattr(args, "sweeps", None) is not None:
        settings["sweeps"] = args.sweeps
    if getattr(args, "mode", None):
        settings["mode"] = args.mode
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.out:
        settings["out"] = args.out
    return settings


def _build_run_config(args) -> RunConfig:
    cfg = _load_config_file(args.config) if args.config else {}
    path, schema, name = _resolve_dataset(cfg)
    s = _merged_settings(args, cfg)
    try:
        losses = tuple(loss_from_name(n, epsilon=s["epsilon"]) for n in s["losses"])
        schemes = tuple(
            scheme_from_name(n, newton_tol=s["newton_tol"], gamma=s["gamma"])
            for n in s["schemes"]
        )
        return RunConfig(
            dataset_path=path,
            schema=schema,
            losses=losses,
            schemes=schemes,
            out_dir=s["out"],
            dataset_name=name,
            batch_size=int(s["batch_size"]),
            n_sweeps=s["sweeps"],
            mode=s["mode"],
            beta=float(s["beta"]),
            prior=PriorFactor(variance=float(s["prior_variance"])),
            seed=s["seed"],
            cost_every=int(s["cost_every"]),
            timing_repetitions=int(s["timing_repetitions"]),
            with_references=bool(s["references"]),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _cmd_run(args) -> int:
    config = _build_run_config(args)
    manifest = run_experiment(config)
    for run in manifest["runs"]:
        ref = run["reference_cost"]
        ref_text = "n/a" if ref is None else f"{ref:.4f}"
        print(
            f"{run['loss']:>8s} {run['scheme']:>4s}  "
            f"final_cost={run['final_cost']:.4f}  reference={ref_text}  "
            f"rejected={run['rejected_updates']}  "
            f"scheme_failures={run['scheme_failures']}"
        )
    out = Path(config.out_dir)
    print(f"wrote {len(manifest['runs'])} trace file(s), "
          f"{out / 'timing.csv'} and {out / 'manifest.json'}")
    if manifest["failures"]:
        for failure in manifest["failures"]:
            print(f"FAILED: {failure}", file=sys.stderr)
        return _RUNS_FAILED
    return 0


def _cmd_reference(args) -> int:
    cfg = _load_config_file(args.config) if args.config else {}
    path, schema, name = _resolve_dataset(cfg)
    s = _merged_settings(args, cfg)
    dataset = preprocess(load_csv(path, schema), name=name)
    prior = PriorFactor(variance=float(s["prior_variance"]))
    losses = [loss_from_name(n, epsilon=s["epsilon"]) for n in s["losses"]]

    theta_log = reference_newton_logistic(dataset, prior)
    refs = {}
    for loss in losses:
        if loss.name == "logistic":
            theta, converged = theta_log, True
        else:
            result = reference_powell(dataset, loss, theta_log, prior)
            theta, converged = result.theta, result.converged
        refs[loss.name] = {
            "theta": [float(v) for v in theta],
            "cost": total_cost(theta, dataset, loss),
            "cost_with_prior": total_cost(theta, dataset, loss, prior),
            "converged": converged,
        }
        print(f"{loss.name:>8s}  cost={refs[loss.name]['cost']:.6f}  "
              f"converged={converged}")
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    target = out / "references.json"
    with open(target, "w") as fh:
        json.dump({"dataset": name, "references": refs}, fh, indent=2)
    print(f"wrote {target}")
    return 0


def _cmd_report(args) -> int:
    root = Path(args.out)
    tables = sorted(root.rglob("timing.csv"))
    if not tables:
        print(f"no timing.csv found under {root}", file=sys.stderr)
        return _DATA_ERROR
    rows = []
    for table in tables:
        with open(table, newline="") as fh:
            rows.extend(csv.DictReader(fh))
    header = ["dataset", "N", "d", "s", "loss", "scheme", "mean_ms_per_minibatch"]
    print(",".join(header))
    for row in rows:
        print(",".join(row[h] for h in header))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "reference": _cmd_reference, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except _UsageError as exc:
        print(f"ffep: error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except (DataLoadError, FileNotFoundError) as exc:
        print(f"ffep: data error: {exc}", file=sys.stderr)
        return _DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
