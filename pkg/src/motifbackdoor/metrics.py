"""Attack success rate, misclassification confidence, benign accuracy drop and
the inference-time Jaccard edge-pruning defense."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .attack import Placement, Trigger, inject_trigger
from .gnn import GnnModel
from .graph import Graph
from .seeds import derive_seed


@dataclass(frozen=True)
class MetricsRow:
    asr: float
    amc: float
    bad: float
    benign_acc: float
    backdoor_acc: float
    n_attacked: int
    n_success: int

    def as_dict(self) -> dict:
        return asdict(self)


def attack_success_rate(n_success: int, n_attacked: int) -> float:
    if n_attacked <= 0:
        raise ValueError("no attacked samples")
    return n_success / n_attacked


def average_misclassification_confidence(confidences: Sequence[float]) -> float:
    """Mean target-class confidence over successful attacks; NaN when there are none."""
    return float(np.mean(confidences)) if len(confidences) else math.nan


def benign_accuracy_drop(benign_acc: float, backdoor_acc: float) -> float:
    return benign_acc - backdoor_acc


def jaccard_similarity(graph: Graph, u: int, v: int) -> float:
    if u == v:
        raise ValueError("Jaccard similarity needs two distinct nodes")
    if not (0 <= u < graph.num_nodes and 0 <= v < graph.num_nodes):
        raise IndexError("node id out of range")
    nu = graph.neighbors[u] - {u, v}
    nv = graph.neighbors[v] - {u, v}
    union = nu | nv
    return len(nu & nv) / len(union) if union else 0.0


def jaccard_defense(graph: Graph, drop_fraction: float = 0.1) -> Graph:
    """Remove the ``floor(drop_fraction * |E|)`` least neighbour-similar edges."""
    if not 0.0 <= drop_fraction < 1.0:
        raise ValueError("drop_fraction must lie in [0, 1)")
    n_drop = int(math.floor(drop_fraction * graph.num_edges + 1e-9))
    if n_drop == 0:
        return graph
    # edges are stored in lexicographic order and sorted() is stable
    ranked = sorted(graph.edges, key=lambda e: jaccard_similarity(graph, *e))
    dropped = set(ranked[:n_drop])
    return graph.with_edges(e for e in graph.edges if e not in dropped)


Defense = Callable[[Graph], Graph]


def evaluate_attack(
    backdoored: GnnModel,
    benign: GnnModel,
    test_graphs: Sequence[Graph],
    trigger: Trigger,
    placement: Placement,
    target_label: int,
    seed: int = 0,
    defense: Defense | None = None,
) -> MetricsRow:
    """Trigger every non-target test graph with ``placement`` and score both models.

    ``defense``, when given, is applied to every inference input, clean or triggered.
    """
    test_graphs = list(test_graphs)
    attacked = [g for g in test_graphs if g.label != target_label]
    if not attacked:
        raise ValueError("no test graph outside the target label")
    rng = np.random.default_rng(derive_seed(seed, "eval-place"))
    guard = defense or (lambda g: g)
    triggered = [guard(inject_trigger(g, trigger, placement(g, trigger, rng))) for g in attacked]
    probs = backdoored.predict_proba(triggered)
    hit = probs.argmax(axis=1) == target_label
    n_success = int(hit.sum())

    clean = [guard(g) for g in test_graphs]
    labels = np.array([g.label for g in test_graphs])
    acc_be = float((benign.predict_proba(clean).argmax(axis=1) == labels).mean())
    acc_bd = float((backdoored.predict_proba(clean).argmax(axis=1) == labels).mean())
    return MetricsRow(
        asr=attack_success_rate(n_success, len(attacked)),
        amc=average_misclassification_confidence(probs[hit, target_label]),
        bad=benign_accuracy_drop(acc_be, acc_bd),
        benign_acc=acc_be,
        backdoor_acc=acc_bd,
        n_attacked=len(attacked),
        n_success=n_success,
    )
