import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from motifbackdoor import cli
from motifbackdoor.attack import BackdoorConfig
from motifbackdoor.experiment import (
    ExperimentConfig,
    clear_cache,
    defense_comparison,
    motif_scan,
    run_experiment,
    sensitivity_sweep,
    series_grid,
)
from motifbackdoor.gnn import TrainConfig
from motifbackdoor.motifs import MOTIFS
from motifbackdoor.report import (
    RUN_HEADER,
    Aggregate,
    ExperimentReport,
    RunRow,
    read_matrix_csv,
    read_runs_csv,
    read_table_csv,
    write_matrix_csv,
    write_runs_csv,
)
from motifbackdoor.seeds import derive_seed, stage_rng
from motifbackdoor.synthetic import CYCLE_CLASS, TREE_CLASS, smoke_corpus, tree_corpus

FAST = TrainConfig(epochs=3)


def fast_config(**kw):
    return ExperimentConfig(train=FAST, **kw)


# --- seeds -----------------------------------------------------------------


def test_stage_seeds_distinct_and_stable():
    a = derive_seed(0, "split")
    assert a == derive_seed(0, "split")
    assert len({derive_seed(s, st) for s in range(5) for st in ("split", "benign-train", "poison-sample")}) == 15
    assert stage_rng(3, "x").random() == stage_rng(3, "x").random()


# --- synthetic corpora -----------------------------------------------------


def test_smoke_corpus_shape():
    ds = smoke_corpus()
    assert len(ds) == 200 and ds.num_classes == 2
    assert sorted(np.bincount(ds.labels).tolist()) == [100, 100]
    assert all(10 <= g.num_nodes <= 20 and g.is_connected() for g in ds.graphs)
    assert all(g.num_edges == g.num_nodes - 1 for g in ds.graphs if g.label == TREE_CLASS)
    assert all(g.num_edges >= g.num_nodes + 1 for g in ds.graphs if g.label == CYCLE_CLASS)


def test_smoke_corpus_deterministic():
    a, b = smoke_corpus(seed=4), smoke_corpus(seed=4)
    assert all(x.edges == y.edges for x, y in zip(a.graphs, b.graphs))


def test_tree_corpus_is_acyclic():
    ds = tree_corpus(50)
    assert all(g.num_edges == g.num_nodes - 1 and g.is_connected() for g in ds.graphs)


# --- report files ----------------------------------------------------------


def rows5():
    return [RunRow(i, i, "smoke", "gcn", "motif-backdoor", 0.8 + i / 100, 0.9, 0.01 * i, 0.97, 1.5) for i in range(5)]


def test_runs_csv_round_trip(tmp_path):
    rows = rows5()
    write_runs_csv(tmp_path / "runs.csv", rows)
    lines = (tmp_path / "runs.csv").read_text().splitlines()
    assert lines[0] == ",".join(RUN_HEADER)
    assert len(lines) == 7 and lines[-1].startswith("aggregate,")
    back, agg = read_runs_csv(tmp_path / "runs.csv")
    assert back == rows
    assert abs(agg.mean["asr"] - np.mean([r.asr for r in rows])) < 1e-12
    assert agg.std["asr"] == pytest.approx(np.std([r.asr for r in rows], ddof=1))


def test_aggregate_skips_nan():
    rows = rows5()
    rows[2].amc = math.nan
    agg = Aggregate.of(rows)
    assert agg.mean["amc"] == pytest.approx(0.9)


def test_read_runs_rejects_header(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_runs_csv(tmp_path / "x.csv")


def test_matrix_round_trip(tmp_path):
    m = np.arange(64, dtype=float).reshape(8, 8) / 64
    names = [x.value for x in MOTIFS]
    write_matrix_csv(tmp_path / "g.csv", m, names, names)
    back, r, c = read_matrix_csv(tmp_path / "g.csv")
    assert np.array_equal(back, m) and r == names == c


# --- experiments -----------------------------------------------------------


@pytest.fixture(scope="module")
def report_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rep = run_experiment(fast_config(out=str(out)))
    return rep, out


def test_run_experiment_rows(report_dir):
    rep, out = report_dir
    assert [r.run_id for r in rep.rows] == [0, 1, 2, 3, 4]
    assert [r.seed for r in rep.rows] == [0, 1, 2, 3, 4]
    rows, agg = read_runs_csv(out / "runs.csv")
    assert len(rows) == 5 and agg is not None
    assert abs(agg.mean["asr"] - sum(r.asr for r in rows) / 5) < 1e-12
    assert all(r.wall_time_s > 0 for r in rows)


def test_report_json_and_manifests(report_dir):
    rep, out = report_dir
    doc = json.loads((out / "report.json").read_text())
    assert "created_at" in doc and len(doc["rows"]) == 5
    assert doc["audit"]["0"]["target_queries"] == doc["audit"]["0"]["available"]
    assert doc["audit"]["0"]["blocked_reads"] == 0
    man = json.loads((out / "manifest_run0.json").read_text())
    assert man["trigger"]["motif"] == "M46" and len(man["poisoned"]) == 15


def _without_wall_time(path):
    with open(path) as fh:
        return [row[:-1] for row in csv.reader(fh)]


def test_rerun_identical(report_dir, tmp_path):
    _, out = report_dir
    clear_cache()
    run_experiment(fast_config(out=str(tmp_path)))
    assert _without_wall_time(out / "runs.csv") == _without_wall_time(tmp_path / "runs.csv")


def test_workers_do_not_change_results(report_dir):
    rep, _ = report_dir
    par = run_experiment(fast_config(repetitions=2, workers=2))
    for a, b in zip(rep.rows[:2], par.rows):
        assert (a.asr, a.amc, a.bad, a.benign_acc) == (b.asr, b.amc, b.bad, b.benign_acc)


def test_failures_are_data():
    # poison rate so low no graph gets poisoned: every run fails, report still built
    rep = run_experiment(fast_config(repetitions=2, backdoor=BackdoorConfig(poison_rate=0.001)))
    assert len(rep.rows) == 2 and set(rep.errors) == {0, 1}
    assert all(math.isnan(r.asr) for r in rep.rows)
    assert "selects no graph" in rep.errors[0]


def test_config_validation():
    for bad in (dict(model="gat"), dict(attack="gta"), dict(repetitions=0), dict(dataset="AIDS"), dict(defense_drop=1.0)):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad).validate()


def test_motif_scan_table(tmp_path):
    rows = motif_scan(fast_config(repetitions=1, out=str(tmp_path)))
    assert [r["motif"] for r in rows] == [m.value for m in MOTIFS]
    assert {"motif", "tar_avg", "oth_avg", "asr"} <= set(rows[0])
    back = read_table_csv(tmp_path / "motif_scan.csv")
    assert [r["motif"] for r in back] == [r["motif"] for r in rows]


def test_series_grid_shape(tmp_path):
    grid = series_grid(fast_config(repetitions=1, out=str(tmp_path)))
    assert grid.shape == (8, 8)
    assert ((grid >= 0) & (grid <= 1)).all()
    back, rows, cols = read_matrix_csv(tmp_path / "series_grid.csv")
    assert np.array_equal(back, grid) and rows[0] == "M31"


def test_sweep_table(tmp_path):
    rows = sensitivity_sweep(fast_config(repetitions=1, out=str(tmp_path)), "p", [0.05, 0.1])
    assert [r["value"] for r in rows] == [0.05, 0.1]
    assert read_table_csv(tmp_path / "sweep_p.csv")[1]["value"] == 0.1
    with pytest.raises(ValueError):
        sensitivity_sweep(fast_config(), "q", [1])
    with pytest.raises(ValueError):
        sensitivity_sweep(fast_config(), "k", [])


def test_defense_pairs(tmp_path):
    rep = defense_comparison(fast_config(repetitions=2, out=str(tmp_path)))
    assert [r.attack for r in rep.rows] == ["motif-backdoor", "motif-backdoor-def"] * 2
    plain, _ = read_runs_csv(tmp_path / "undefended.csv")
    defended, _ = read_runs_csv(tmp_path / "defended.csv")
    assert len(plain) == len(defended) == 2


def test_dataset_on_disk_untouched(tmp_path):
    from motifbackdoor.graph import write_tu_dataset

    write_tu_dataset(smoke_corpus(), tmp_path / "data")
    (tmp_path / "data" / "smoke_A.txt").rename(tmp_path / "data" / "SM_A.txt")
    for k in ("graph_indicator", "graph_labels"):
        (tmp_path / "data" / f"smoke_{k}.txt").rename(tmp_path / "data" / f"SM_{k}.txt")
    before = {p.name: p.read_bytes() for p in (tmp_path / "data").iterdir()}
    rep = run_experiment(fast_config(dataset="SM", data_dir=str(tmp_path / "data"), repetitions=1))
    assert not rep.errors
    assert before == {p.name: p.read_bytes() for p in (tmp_path / "data").iterdir()}


# --- CLI -------------------------------------------------------------------


def test_cli_census(capsys, tmp_path):
    assert cli.main(["census", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "motif,tar_avg,oth_avg,absent" and len(out) == 9
    assert read_table_csv(tmp_path / "census.csv")[1]["absent"] == 1


def test_cli_attack_and_report(capsys, tmp_path):
    assert cli.main(["attack", "--epochs", "2", "--reps", "2", "--attack", "er-b", "--out", str(tmp_path)]) == 0
    assert "er-b: asr=" in capsys.readouterr().out
    assert cli.main(["report", str(tmp_path / "runs.csv")]) == 0
    assert "2 runs" in capsys.readouterr().out


def test_cli_other_subcommands(capsys, tmp_path):
    base = ["--epochs", "1", "--reps", "1", "--out", str(tmp_path)]
    assert cli.main(["train-benign", *base]) == 0
    assert (tmp_path / "benign_gcn_seed0.json").exists() and (tmp_path / "benign.csv").exists()
    assert cli.main(["sweep", "--param", "k", "--values", "4,10", *base]) == 0
    assert cli.main(["defend", "--drop-fraction", "0.2", *base]) == 0
    assert (tmp_path / "sweep_k.csv").exists() and (tmp_path / "defended.csv").exists()


def test_cli_bad_config_exit_code(capsys):
    assert cli.main(["attack", "--dataset", "PROTEINS"]) == 2
    assert "data-dir" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text("[experiment]\nmodel = gin\nreps = 3\n\n[backdoor]\npoison_rate = 0.2\nfilter_count = 6\n\n[train]\nepochs = 7\n")
    parser = cli.build_parser()
    cfg = cli.config_from_args(parser.parse_args(["attack", "--config", str(ini)]))
    assert (cfg.model, cfg.repetitions, cfg.backdoor.poison_rate, cfg.backdoor.filter_count, cfg.train.epochs) == ("gin", 3, 0.2, 6, 7)
    cfg = cli.config_from_args(parser.parse_args(["attack", "--config", str(ini), "--model", "gcn", "--poison-rate", "0.05"]))
    assert (cfg.model, cfg.backdoor.poison_rate, cfg.repetitions) == ("gcn", 0.05, 3)
    cfg = cli.config_from_args(parser.parse_args(["attack"]))
    assert (cfg.model, cfg.backdoor.poison_rate, cfg.repetitions) == ("gcn", 0.1, 5)


def test_config_unknown_key(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[backdoor]\npoison_rat = 0.2\n")
    with pytest.raises(ValueError, match="poison_rat"):
        cli.config_from_args(cli.build_parser().parse_args(["attack", "--config", str(ini)]))


def test_default_target_labels():
    args = cli.build_parser().parse_args(["attack", "--dataset", "PROTEINS", "--data-dir", "/nonexistent"])
    assert cli.config_from_args(args).backdoor.target_label == 1
