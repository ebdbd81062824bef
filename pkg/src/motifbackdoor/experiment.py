"""Seeded experiment orchestration: repeated attacks, the motif scan, the
series-trigger grid, defense comparison and sensitivity sweeps.

Run ``i`` of an experiment uses seed ``base_seed + i``; every stage inside a
run derives its own seed from that (see :mod:`motifbackdoor.seeds`). Stage
failures are recorded per run and never abort the other runs.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .attack import AttackOutcome, BackdoorConfig, Trigger, train_benign
from .baselines import AttackKind, place_random, run_attack
from .gnn import GnnModel, TrainConfig, accuracy, save_model
from .graph import Dataset, Split, load_tu_dataset, split_dataset
from .metrics import MetricsRow, evaluate_attack, jaccard_defense
from .motifs import MOTIFS, MotifId, dataset_distribution
from .report import ExperimentReport, RunRow, write_matrix_csv, write_report_json, write_runs_csv, write_table_csv
from .seeds import derive_seed
from .synthetic import smoke_corpus, tree_corpus

log = logging.getLogger(__name__)

SYNTHETIC = {"smoke": smoke_corpus, "trees": tree_corpus}

# Target labels per public dataset, after remapping raw labels to 0..C-1.
DEFAULT_TARGET_LABELS = {"PROTEINS": 1, "AIDS": 0, "NCI1": 0, "DBLP_v1": 0}


@dataclass
class ExperimentConfig:
    dataset: str = "smoke"
    data_dir: str | None = None
    model: str = "gcn"
    attack: str = AttackKind.MOTIF_BACKDOOR.value
    backdoor: BackdoorConfig = field(default_factory=BackdoorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    repetitions: int = 5
    seed: int = 0
    ratios: tuple[float, float, float] = (0.75, 0.05, 0.20)
    defense_drop: float = 0.1
    workers: int = 1
    out: str | None = None

    def validate(self) -> None:
        if self.model not in ("gcn", "gin"):
            raise ValueError(f"model must be gcn or gin, got {self.model!r}")
        AttackKind(self.attack)
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.dataset not in SYNTHETIC and not self.data_dir:
            raise ValueError(f"dataset {self.dataset!r} needs --data-dir")
        if not 0.0 <= self.defense_drop < 1.0:
            raise ValueError("defense drop fraction must lie in [0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")

    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.repetitions)]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = list(self.ratios)
        return d


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.dataset in SYNTHETIC and not config.data_dir:
        return SYNTHETIC[config.dataset]()
    return load_tu_dataset(config.data_dir, config.dataset)


@dataclass
class RunContext:
    """Everything shared by the attacks of one seed: split and benign model."""

    seed: int
    split: Split
    benign: GnnModel
    train: TrainConfig
    backdoor: BackdoorConfig


_BENIGN_CACHE: dict[tuple, GnnModel] = {}


def run_context(dataset: Dataset, config: ExperimentConfig, seed: int) -> RunContext:
    split = split_dataset(dataset, config.ratios, derive_seed(seed, "split"))
    tc = replace(config.train, seed=seed)
    bc = replace(config.backdoor, seed=seed)
    key = (id(dataset), dataset.name, len(dataset), config.model, seed, tc.learning_rate, tc.epochs, tc.batch_size, config.ratios)
    if key not in _BENIGN_CACHE:
        _BENIGN_CACHE[key] = train_benign(dataset, split, config.model, tc)
    return RunContext(seed, split, _BENIGN_CACHE[key], tc, bc)


def clear_cache() -> None:
    _BENIGN_CACHE.clear()


def _evaluate(ctx: RunContext, dataset: Dataset, out: AttackOutcome, defense=None, placement=None, trigger=None) -> MetricsRow:
    return evaluate_attack(
        out.model,
        out.benign,
        dataset.subset(ctx.split.test_idx),
        trigger or out.trigger,
        placement or out.placement,
        ctx.backdoor.target_label,
        ctx.seed,
        defense,
    )


@dataclass
class RunResult:
    run_id: int
    seed: int
    metrics: MetricsRow | None
    wall_time: float
    error: str | None = None
    manifest: list[dict] = field(default_factory=list)
    trigger: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    defended: MetricsRow | None = None


def _one_run(dataset: Dataset, config: ExperimentConfig, run_id: int, defend: bool = False) -> RunResult:
    seed = config.seed + run_id
    t0 = time.perf_counter()
    try:
        ctx = run_context(dataset, config, seed)
        out = run_attack(config.attack, dataset, ctx.split, config.model, ctx.backdoor, ctx.train, ctx.benign)
        row = _evaluate(ctx, dataset, out)
        defended = None
        if defend:
            drop = config.defense_drop
            defended = _evaluate(ctx, dataset, out, defense=lambda g: jaccard_defense(g, drop))
        return RunResult(
            run_id,
            seed,
            row,
            time.perf_counter() - t0,
            manifest=[e.to_json() for e in out.manifest],
            trigger={"motif": out.trigger.name, "edges": [list(e) for e in out.trigger.topology.edges]},
            audit={"target_queries": out.query_count, "available": out.num_available, "blocked_reads": out.blocked_reads},
            defended=defended,
        )
    except Exception as exc:  # failures are data
        log.warning("run %d (seed %d) failed: %s", run_id, seed, exc)
        return RunResult(run_id, seed, None, time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")


def _run_all(dataset: Dataset, config: ExperimentConfig, defend: bool) -> list[RunResult]:
    ids = list(range(config.repetitions))
    if config.workers > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_one_run, [dataset] * len(ids), [config] * len(ids), ids, [defend] * len(ids)))
    return [_one_run(dataset, config, i, defend) for i in ids]


def _row(config: ExperimentConfig, dataset: Dataset, res: RunResult, metrics: MetricsRow | None, attack: str) -> RunRow:
    row = RunRow(res.run_id, res.seed, dataset.name, config.model, attack, wall_time_s=res.wall_time)
    if metrics is not None:
        row.asr, row.amc, row.bad, row.benign_acc = metrics.asr, metrics.amc, metrics.bad, metrics.benign_acc
    return row


def run_experiment(config: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentReport:
    """``config.repetitions`` seeded runs of ``config.attack``; writes CSV/JSON when ``config.out`` is set."""
    config.validate()
    dataset = dataset or load_dataset(config)
    results = _run_all(dataset, config, defend=False)
    report = ExperimentReport(
        [_row(config, dataset, r, r.metrics, config.attack) for r in results],
        {r.run_id: r.error for r in results if r.error},
        config.as_dict(),
    )
    report.results = results  # type: ignore[attr-defined]
    if config.out:
        out = Path(config.out)
        write_runs_csv(out / "runs.csv", report.rows)
        write_report_json(
            out / "report.json",
            report,
            {"created_at": time.strftime("%Y-%m-%dT%H:%M:%S"), "audit": {r.run_id: r.audit for r in results}},
        )
        for r in results:
            if r.error is None:
                (out / f"manifest_run{r.run_id}.json").write_text(
                    json.dumps({"seed": r.seed, "trigger": r.trigger, "poisoned": r.manifest}, indent=1)
                )
    return report


def defense_comparison(config: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentReport:
    """Paired (undefended, defended) rows per run; pruning hits every inference input."""
    config.validate()
    dataset = dataset or load_dataset(config)
    results = _run_all(dataset, config, defend=True)
    rows = []
    for r in results:
        rows.append(_row(config, dataset, r, r.metrics, config.attack))
        rows.append(_row(config, dataset, r, r.defended, f"{config.attack}-def"))
    report = ExperimentReport(rows, {r.run_id: r.error for r in results if r.error}, config.as_dict())
    if config.out:
        out = Path(config.out)
        write_runs_csv(out / "defense_runs.csv", rows, aggregate=False)
        plain = [x for x in rows if not x.attack.endswith("-def")]
        defended = [x for x in rows if x.attack.endswith("-def")]
        write_runs_csv(out / "undefended.csv", plain)
        write_runs_csv(out / "defended.csv", defended)
    return report


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    v = np.array([x for x in values if x is not None and math.isfinite(x)], dtype=np.float64)
    if not len(v):
        return math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0


def motif_scan(config: ExperimentConfig, dataset: Dataset | None = None) -> list[dict]:
    """Random-placement attack with each of the eight motifs as trigger."""
    config.validate()
    dataset = dataset or load_dataset(config)
    dist = dataset_distribution(dataset, config.backdoor.target_label)
    asr: dict[MotifId, list[float]] = {m: [] for m in MOTIFS}
    errors: dict[MotifId, list[str]] = {m: [] for m in MOTIFS}
    for seed in config.seeds():
        try:
            ctx = run_context(dataset, config, seed)
        except Exception as exc:
            for m in MOTIFS:
                errors[m].append(str(exc))
            continue
        for m in MOTIFS:
            try:
                trig = Trigger.from_motif(m, max_edges=6)
                out = run_attack(AttackKind.MOTIF_R, dataset, ctx.split, config.model, ctx.backdoor, ctx.train, ctx.benign, trig)
                asr[m].append(_evaluate(ctx, dataset, out).asr)
            except Exception as exc:
                errors[m].append(f"seed {seed}: {exc}")
    rows = []
    for m in MOTIFS:
        mean, std = _mean_std(asr[m])
        rows.append(
            {
                "motif": m.value,
                "tar_avg": dist.tar_avg[m],
                "oth_avg": dist.oth_avg[m],
                "absent": int(m in dist.absent_in_dataset),
                "asr": mean,
                "asr_std": std,
                "error": "; ".join(errors[m]),
            }
        )
    if config.out:
        write_table_csv(Path(config.out) / "motif_scan.csv", rows, ["motif", "tar_avg", "oth_avg", "absent", "asr", "asr_std", "error"])
    return rows


def series_grid(config: ExperimentConfig, dataset: Dataset | None = None) -> np.ndarray:
    """8x8 mean ASR: rows are training triggers, columns are inference triggers (random placement)."""
    config.validate()
    dataset = dataset or load_dataset(config)
    cells: list[list[list[float]]] = [[[] for _ in MOTIFS] for _ in MOTIFS]
    for seed in config.seeds():
        try:
            ctx = run_context(dataset, config, seed)
        except Exception as exc:
            log.warning("grid seed %d failed: %s", seed, exc)
            continue
        for i, row_m in enumerate(MOTIFS):
            try:
                out = run_attack(
                    AttackKind.MOTIF_R, dataset, ctx.split, config.model, ctx.backdoor, ctx.train, ctx.benign,
                    Trigger.from_motif(row_m, 6),
                )
            except Exception as exc:
                log.warning("grid row %s seed %d failed: %s", row_m, seed, exc)
                continue
            for j, col_m in enumerate(MOTIFS):
                try:
                    cells[i][j].append(_evaluate(ctx, dataset, out, placement=place_random, trigger=Trigger.from_motif(col_m, 6)).asr)
                except Exception as exc:
                    log.warning("grid cell %s/%s seed %d failed: %s", row_m, col_m, seed, exc)
    grid = np.array([[_mean_std(c)[0] for c in row] for row in cells])
    if config.out:
        names = [m.value for m in MOTIFS]
        write_matrix_csv(Path(config.out) / "series_grid.csv", grid, names, names)
    return grid


def sensitivity_sweep(
    config: ExperimentConfig, param: str, values: Sequence[float], dataset: Dataset | None = None
) -> list[dict]:
    """One full experiment per value of the filter count ``k`` or poison rate ``p``."""
    if param not in ("k", "p"):
        raise ValueError("sweep parameter must be 'k' or 'p'")
    if not values:
        raise ValueError("no sweep values")
    dataset = dataset or load_dataset(config)
    rows = []
    for v in values:
        if param == "k":
            bd = replace(config.backdoor, filter_count=int(v))
        else:
            bd = replace(config.backdoor, poison_rate=float(v))
        cfg = replace(config, backdoor=bd, out=None)
        try:
            rep = run_experiment(cfg, dataset)
            agg = rep.aggregate
            rows.append(
                {
                    "param": param,
                    "value": v,
                    "asr_mean": agg.mean["asr"],
                    "asr_std": agg.std["asr"],
                    "bad_mean": agg.mean["bad"],
                    "runs": sum(1 for r in rep.rows if math.isfinite(r.asr)),
                    "error": "; ".join(rep.errors.values()),
                }
            )
        except Exception as exc:
            rows.append({"param": param, "value": v, "asr_mean": math.nan, "asr_std": math.nan, "bad_mean": math.nan, "runs": 0, "error": str(exc)})
    if config.out:
        write_table_csv(
            Path(config.out) / f"sweep_{param}.csv", rows, ["param", "value", "asr_mean", "asr_std", "bad_mean", "runs", "error"]
        )
    return rows


def census_rows(dataset: Dataset, target_label: int, workers: int = 1) -> list[dict]:
    return dataset_distribution(dataset, target_label, workers).rows()


def train_benign_models(config: ExperimentConfig, dataset: Dataset | None = None) -> list[dict]:
    """Benign model per seed with clean test accuracy; checkpoints saved under ``out``."""
    config.validate()
    dataset = dataset or load_dataset(config)
    rows = []
    for seed in config.seeds():
        ctx = run_context(dataset, config, seed)
        acc = accuracy(ctx.benign, dataset.subset(ctx.split.test_idx))
        rows.append({"seed": seed, "model": config.model, "dataset": dataset.name, "test_acc": acc})
        if config.out:
            Path(config.out).mkdir(parents=True, exist_ok=True)
            save_model(ctx.benign, Path(config.out) / f"benign_{config.model}_seed{seed}.json")
    if config.out:
        write_table_csv(Path(config.out) / "benign.csv", rows, ["seed", "model", "dataset", "test_acc"])
    return rows
