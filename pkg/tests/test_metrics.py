import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complete, cycle, make_graph, path
from motifbackdoor.attack import Trigger, inject_trigger
from motifbackdoor.baselines import place_random
from motifbackdoor.gnn import GnnModel, init_model
from motifbackdoor.graph import Graph, erdos_renyi_graph
from motifbackdoor.metrics import (
    attack_success_rate,
    average_misclassification_confidence,
    benign_accuracy_drop,
    evaluate_attack,
    jaccard_defense,
    jaccard_similarity,
)
from motifbackdoor.motifs import MotifId, classify_connected
from motifbackdoor.synthetic import smoke_corpus


def test_metric_examples():
    assert attack_success_rate(3, 4) == 0.75
    assert average_misclassification_confidence([0.9, 0.7]) == pytest.approx(0.8)
    assert benign_accuracy_drop(0.76, 0.74) == pytest.approx(0.02)
    assert math.isnan(average_misclassification_confidence([]))
    with pytest.raises(ValueError):
        attack_success_rate(0, 0)


def test_jaccard_examples():
    # u=0 with N={1,2,3}, v=5 with N={2,3,4}
    g = Graph(6, [(0, 1), (0, 2), (0, 3), (5, 2), (5, 3), (5, 4)])
    assert jaccard_similarity(g, 0, 5) == 0.5
    h = Graph(5, [(0, 2), (0, 3), (1, 2), (1, 3)])
    assert jaccard_similarity(h, 0, 1) == 1.0
    k = Graph(6, [(0, 2), (0, 3), (1, 4), (1, 5)])
    assert jaccard_similarity(k, 0, 1) == 0.0


def test_jaccard_excludes_endpoints_and_empty_union():
    assert jaccard_similarity(path(2), 0, 1) == 0.0
    # triangle edge: each endpoint's other neighbour is the shared third node
    assert jaccard_similarity(complete(3), 0, 1) == 1.0
    with pytest.raises(ValueError):
        jaccard_similarity(path(3), 1, 1)
    with pytest.raises(IndexError):
        jaccard_similarity(path(3), 0, 3)


def test_defense_examples():
    g = cycle(10)
    assert jaccard_defense(g, 0.0) is g
    out = jaccard_defense(g, 0.10)
    assert out.num_edges == 9
    # all cycle edges score 0, so the lexicographically first goes
    assert (0, 1) not in out.edges


def test_defense_prefers_low_similarity():
    # K4 plus a pendant edge: the pendant edge has similarity 0, K4 edges more
    g = Graph(5, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4)])
    out = jaccard_defense(g, 1 / 7)
    assert (3, 4) not in out.edges and out.num_edges == 6


def test_defense_rejects_fraction():
    with pytest.raises(ValueError):
        jaccard_defense(path(3), 1.0)


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 12))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph(n, [p for p, m in zip(pairs, mask) if m], np.arange(n, dtype=float)[:, None])


@settings(max_examples=100)
@given(graphs(), st.floats(0, 0.99))
def test_defense_is_subgraph(g, frac):
    out = jaccard_defense(g, frac)
    assert set(out.edges) <= set(g.edges)
    assert out.num_nodes == g.num_nodes
    assert np.array_equal(out.features, g.features)
    assert g.num_edges - out.num_edges == math.floor(frac * g.num_edges + 1e-9)
    assert jaccard_defense(g, frac).edges == out.edges


def test_defense_keeps_degree_features_consistent():
    g = Graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)], degree_cap=10)
    out = jaccard_defense(g, 0.25)
    assert np.array_equal(out.features, Graph(5, out.edges, degree_cap=10).features)


class LabelModel(GnnModel):
    """Says the target label iff the graph holds a K4, otherwise class by node-count parity."""

    def __init__(self):
        super().__init__("gcn", 11, 2)

    def predict_proba(self, graphs, batch_size=512):
        out = []
        for g in graphs:
            has_k4 = any(len(g.neighbors[u] & g.neighbors[v]) >= 2 and self._k4(g, u, v) for u, v in g.edges)
            out.append([0.9, 0.1] if has_k4 else [0.2, 0.8])
        return np.array(out)

    @staticmethod
    def _k4(g, u, v):
        common = list(g.neighbors[u] & g.neighbors[v])
        return any(b in g.neighbors[a] for i, a in enumerate(common) for b in common[i + 1 :])


def test_evaluate_attack_accounting():
    ds = smoke_corpus(40)
    m = LabelModel()
    row = evaluate_attack(m, m, ds.graphs, Trigger.from_motif("M46"), place_random, target_label=0, seed=0)
    assert row.n_attacked == 20 and row.n_success == 20 and row.asr == 1.0
    assert row.amc == pytest.approx(0.9)
    # the benign model scored on its own clean predictions: bad is exactly 0
    assert row.bad == 0.0
    assert 0 <= row.n_success <= row.n_attacked


def test_evaluate_attack_no_success_amc_nan():
    ds = smoke_corpus(20)
    m = GnnModel("gcn", 11, 2)  # uniform output; argmax tie goes to class 0
    row = evaluate_attack(m, m, ds.graphs, Trigger.from_motif("M31"), place_random, target_label=1)
    assert row.asr == 0.0 and math.isnan(row.amc)


def test_evaluate_attack_needs_attacked_set():
    ds = smoke_corpus(20)
    only_target = [g for g in ds.graphs if g.label == 0]
    m = GnnModel("gcn", 11, 2)
    with pytest.raises(ValueError):
        evaluate_attack(m, m, only_target, Trigger.from_motif("M32"), place_random, 0)


def test_evaluate_with_defense_prunes_every_input():
    ds = smoke_corpus(20)
    seen = []

    def spy(g):
        seen.append(g)
        return g

    m = init_model("gcn", 11, 2, 0)
    evaluate_attack(m, m, ds.graphs, Trigger.from_motif("M32"), place_random, 0, defense=spy)
    assert len(seen) == 10 + 20  # triggered non-target graphs, then every clean graph
