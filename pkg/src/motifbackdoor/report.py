"""CSV / JSON emission and the matching readers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

RUN_HEADER = ("run_id", "seed", "dataset", "model", "attack", "asr", "amc", "bad", "benign_acc", "wall_time_s")
METRICS = ("asr", "amc", "bad", "benign_acc", "wall_time_s")
AGGREGATE_ID = "aggregate"


@dataclass
class RunRow:
    run_id: int
    seed: int
    dataset: str
    model: str
    attack: str
    asr: float = math.nan
    amc: float = math.nan
    bad: float = math.nan
    benign_acc: float = math.nan
    wall_time_s: float = math.nan


@dataclass
class Aggregate:
    """Per-metric mean and sample standard deviation over the finite run values."""

    mean: dict[str, float]
    std: dict[str, float]

    @classmethod
    def of(cls, rows: Sequence[RunRow]) -> Aggregate:
        mean, std = {}, {}
        for m in METRICS:
            vals = np.array([getattr(r, m) for r in rows], dtype=np.float64)
            vals = vals[np.isfinite(vals)]
            mean[m] = float(vals.mean()) if len(vals) else math.nan
            std[m] = float(vals.std(ddof=1)) if len(vals) > 1 else (0.0 if len(vals) else math.nan)
        return cls(mean, std)


@dataclass
class ExperimentReport:
    rows: list[RunRow]
    errors: dict[int, str] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def aggregate(self) -> Aggregate:
        return Aggregate.of(self.rows)

    def summary(self) -> str:
        agg = self.aggregate
        parts = [f"{m}={agg.mean[m]:.4f}±{agg.std[m]:.4f}" for m in ("asr", "amc", "bad", "benign_acc")]
        return " ".join(parts)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_runs_csv(path: str | Path, rows: Sequence[RunRow], aggregate: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_HEADER)
        for r in rows:
            w.writerow([r.run_id, r.seed, r.dataset, r.model, r.attack] + [_fmt(getattr(r, m)) for m in METRICS])
        if aggregate and rows:
            agg = Aggregate.of(rows)
            first = rows[0]
            w.writerow(
                [AGGREGATE_ID, "", first.dataset, first.model, first.attack]
                + [f"{_fmt(agg.mean[m])}±{_fmt(agg.std[m])}" for m in METRICS]
            )
    return path


def read_runs_csv(path: str | Path) -> tuple[list[RunRow], Aggregate | None]:
    rows: list[RunRow] = []
    agg = None
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RUN_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            if rec["run_id"] == AGGREGATE_ID:
                pairs = {m: rec[m].split("±") for m in METRICS}
                agg = Aggregate({m: float(p[0]) for m, p in pairs.items()}, {m: float(p[1]) for m, p in pairs.items()})
                continue
            rows.append(
                RunRow(
                    int(rec["run_id"]),
                    int(rec["seed"]),
                    rec["dataset"],
                    rec["model"],
                    rec["attack"],
                    *(float(rec[m]) for m in METRICS),
                )
            )
    return rows, agg


def write_report_json(path: str | Path, report: ExperimentReport, extra: dict | None = None) -> Path:
    agg = report.aggregate
    doc = {
        "config": report.config,
        "rows": [asdict(r) for r in report.rows],
        "aggregate": {"mean": agg.mean, "std": agg.std},
        "errors": {str(k): v for k, v in report.errors.items()},
    }
    doc.update(extra or {})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str))
    return path


def write_table_csv(path: str | Path, rows: Iterable[dict], columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) if isinstance(v, float) else v for k, v in r.items()})
    return path


def read_table_csv(path: str | Path) -> list[dict]:
    def conv(v: str):
        try:
            return int(v)
        except ValueError:
            try:
                return float(v)
            except ValueError:
                return v

    with open(path, newline="") as fh:
        return [{k: conv(v) for k, v in rec.items()} for rec in csv.DictReader(fh)]


def write_matrix_csv(path: str | Path, matrix: np.ndarray, row_labels: Sequence[str], col_labels: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["train\\infer", *col_labels])
        for name, row in zip(row_labels, matrix):
            w.writerow([name, *(_fmt(x) for x in row)])
    return path


def read_matrix_csv(path: str | Path) -> tuple[np.ndarray, list[str], list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    return np.array([[float(x) for x in r[1:]] for r in rows[1:]]), names, cols
