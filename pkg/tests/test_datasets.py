"""Checks against the public TU datasets; skipped unless MOTIFBACKDOOR_DATA points at them.

The directory is expected to hold one sub-directory per dataset, e.g.
``$MOTIFBACKDOOR_DATA/AIDS/AIDS_A.txt``.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from motifbackdoor.attack import train_benign
from motifbackdoor.gnn import TrainConfig, accuracy
from motifbackdoor.graph import load_tu_dataset, split_dataset
from motifbackdoor.seeds import derive_seed

ROOT = Path(os.environ.get("MOTIFBACKDOOR_DATA", "/nonexistent"))


def load(name):
    if not (ROOT / name / f"{name}_A.txt").exists():
        pytest.skip(f"{name} not found under {ROOT}")
    return load_tu_dataset(ROOT / name, name)


def test_aids_statistics():
    ds = load("AIDS")
    assert len(ds) == 2000 and ds.num_classes == 2


def test_proteins_statistics():
    ds = load("PROTEINS")
    assert len(ds) == 1113
    assert np.mean([g.num_nodes for g in ds.graphs]) == pytest.approx(39.06, abs=0.01)


@pytest.mark.slow
def test_aids_benign_gcn_accuracy():
    ds = load("AIDS")
    split = split_dataset(ds, seed=derive_seed(0, "split"))
    model = train_benign(ds, split, "gcn", TrainConfig(seed=0))
    assert accuracy(model, ds.subset(split.test_idx)) >= 0.96
