"""Command-line entry point: ``motifbackdoor <subcommand> [flags]``.

Settings resolve as built-in defaults, then the ``--config`` file, then flags.
The config file is INI-style::

    [experiment]
    dataset = smoke
    model = gcn
    reps = 5

    [backdoor]
    poison_rate = 0.1
    filter_count = 10

    [train]
    epochs = 100
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .attack import BackdoorConfig
from .baselines import AttackKind
from .experiment import (
    DEFAULT_TARGET_LABELS,
    ExperimentConfig,
    census_rows,
    defense_comparison,
    load_dataset,
    motif_scan,
    run_experiment,
    sensitivity_sweep,
    series_grid,
    train_benign_models,
)
from .gnn import TrainConfig
from .motifs import MOTIFS
from .report import read_runs_csv, write_table_csv

SUBCOMMANDS = ("census", "train-benign", "attack", "motif-scan", "grid", "sweep", "defend", "report")


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("experiment")
    g.add_argument("--config", help="INI file overriding defaults")
    g.add_argument("--dataset", help="synthetic corpus (smoke, trees) or TU dataset name")
    g.add_argument("--data-dir", help="directory holding the TU text files")
    g.add_argument("--model", choices=["gcn", "gin"])
    g.add_argument("--attack", choices=[k.value for k in AttackKind])
    g.add_argument("--target-label", type=int)
    g.add_argument("--poison-rate", type=float)
    g.add_argument("--filter-k", type=int)
    g.add_argument("--max-trigger-edges", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--reps", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _global_flags()
    parser = argparse.ArgumentParser(prog="motifbackdoor", description=__doc__.split("\n")[0], parents=[parent])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("census", parents=[parent], help="motif distribution of a dataset (CSV)")
    sub.add_parser("train-benign", parents=[parent], help="train and checkpoint benign models")
    sub.add_parser("attack", parents=[parent], help="repeated attack runs with metrics")
    sub.add_parser("motif-scan", parents=[parent], help="ASR of each motif as a randomly placed trigger")
    sub.add_parser("grid", parents=[parent], help="8x8 train-trigger by inference-trigger ASR grid")
    sw = sub.add_parser("sweep", parents=[parent], help="sensitivity to filter count k or poison rate p")
    sw.add_argument("--param", choices=["k", "p"], required=True)
    sw.add_argument("--values", required=True, help="comma-separated values")
    df = sub.add_parser("defend", parents=[parent], help="undefended vs Jaccard-defended metrics")
    df.add_argument("--drop-fraction", type=float, default=None)
    rp = sub.add_parser("report", parents=[parent], help="summarise runs.csv files")
    rp.add_argument("files", nargs="+")
    return parser


def _apply_file(cfg: ExperimentConfig, path: str) -> ExperimentConfig:
    ini = configparser.ConfigParser()
    if not ini.read(path):
        raise FileNotFoundError(path)
    ex = ini["experiment"] if ini.has_section("experiment") else {}
    bd = ini["backdoor"] if ini.has_section("backdoor") else {}
    tr = ini["train"] if ini.has_section("train") else {}
    backdoor = replace(
        cfg.backdoor,
        **{k: type(getattr(cfg.backdoor, k))(v) for k, v in bd.items() if hasattr(cfg.backdoor, k)},
    )
    train = replace(cfg.train, **{k: type(getattr(cfg.train, k))(v) for k, v in tr.items() if hasattr(cfg.train, k)})
    simple = {"dataset": str, "data_dir": str, "model": str, "attack": str, "out": str, "seed": int, "workers": int}
    updates = {k: simple[k](v) for k, v in ex.items() if k in simple}
    if "reps" in ex:
        updates["repetitions"] = int(ex["reps"])
    if "defense_drop" in ex:
        updates["defense_drop"] = float(ex["defense_drop"])
    unknown = set(ex) - set(simple) - {"reps", "defense_drop"}
    unknown |= {k for k in bd if not hasattr(cfg.backdoor, k)} | {k for k in tr if not hasattr(cfg.train, k)}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    return replace(cfg, backdoor=backdoor, train=train, **updates)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg = _apply_file(cfg, args.config)
    flat = {
        "dataset": args.dataset,
        "data_dir": args.data_dir,
        "model": args.model,
        "attack": args.attack,
        "seed": args.seed,
        "repetitions": args.reps,
        "workers": args.workers,
        "out": args.out,
    }
    cfg = replace(cfg, **{k: v for k, v in flat.items() if v is not None})
    bd = {
        "target_label": args.target_label,
        "poison_rate": args.poison_rate,
        "filter_count": args.filter_k,
        "trigger_max_edges": args.max_trigger_edges,
    }
    if args.target_label is None and cfg.dataset in DEFAULT_TARGET_LABELS and not (args.config and _file_sets(args.config, "target_label")):
        bd["target_label"] = DEFAULT_TARGET_LABELS[cfg.dataset]
    cfg = replace(cfg, backdoor=replace(cfg.backdoor, **{k: v for k, v in bd.items() if v is not None}))
    if args.epochs is not None:
        cfg = replace(cfg, train=replace(cfg.train, epochs=args.epochs))
    if getattr(args, "drop_fraction", None) is not None:
        cfg = replace(cfg, defense_drop=args.drop_fraction)
    cfg.validate()
    return cfg


def _file_sets(path: str, key: str) -> bool:
    ini = configparser.ConfigParser()
    ini.read(path)
    return ini.has_option("backdoor", key)


def _print_rows(rows: list[dict], columns: list[str]) -> None:
    print(",".join(columns))
    for r in rows:
        print(",".join(f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in columns))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "report":
        for f in args.files:
            rows, agg = read_runs_csv(f)
            print(f"{f}: {len(rows)} runs")
            for r in rows:
                print(f"  run {r.run_id} seed {r.seed} {r.attack}: asr={r.asr:.4f} amc={r.amc:.4f} bad={r.bad:.4f}")
            if agg is not None:
                print("  " + " ".join(f"{m}={agg.mean[m]:.4f}±{agg.std[m]:.4f}" for m in ("asr", "amc", "bad", "benign_acc")))
        return 0

    try:
        cfg = config_from_args(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out) if cfg.out else None

    if args.command == "census":
        ds = load_dataset(cfg)
        rows = census_rows(ds, cfg.backdoor.target_label, cfg.workers)
        cols = ["motif", "tar_avg", "oth_avg", "absent"]
        if out:
            write_table_csv(out / "census.csv", rows, cols)
        _print_rows(rows, cols)
    elif args.command == "train-benign":
        _print_rows(train_benign_models(cfg), ["seed", "model", "dataset", "test_acc"])
    elif args.command == "attack":
        rep = run_experiment(cfg)
        for r in rep.rows:
            print(f"run {r.run_id} seed {r.seed}: asr={r.asr:.4f} amc={r.amc:.4f} bad={r.bad:.4f} benign_acc={r.benign_acc:.4f}")
        for k, e in rep.errors.items():
            print(f"run {k} failed: {e}", file=sys.stderr)
        print(f"{cfg.attack}: {rep.summary()}")
    elif args.command == "motif-scan":
        _print_rows(motif_scan(cfg), ["motif", "tar_avg", "oth_avg", "absent", "asr", "asr_std"])
    elif args.command == "grid":
        grid = series_grid(cfg)
        names = [m.value for m in MOTIFS]
        print("train\\infer," + ",".join(names))
        for n, row in zip(names, grid):
            print(n + "," + ",".join(f"{x:.4f}" for x in row))
    elif args.command == "sweep":
        values = [float(v) for v in args.values.split(",")]
        if args.param == "k":
            values = [int(v) for v in values]
        _print_rows(sensitivity_sweep(cfg, args.param, values), ["param", "value", "asr_mean", "asr_std", "bad_mean", "runs"])
    elif args.command == "defend":
        rep = defense_comparison(cfg)
        for r in rep.rows:
            print(f"run {r.run_id} {r.attack}: asr={r.asr:.4f} amc={r.amc:.4f} bad={r.bad:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
