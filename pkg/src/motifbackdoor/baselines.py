"""Comparison attacks sharing the poisoning and retraining machinery.

* ER-B: one connected Erdos-Renyi trigger for the whole experiment, random placement.
* MaxDCC: motif-selected trigger placed on the highest degree-centrality nodes.
  The original method scores nodes with a "DCC" measure defined elsewhere;
  plain degree centrality stands in for it here.
* Motif-R: motif-selected trigger, random placement.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .attack import (
    AttackError,
    AttackOutcome,
    BackdoorConfig,
    BlackBoxTarget,
    InjectionPlan,
    Placement,
    Trigger,
    available_indices,
    build_shadow,
    candidate_nodes,
    motif_backdoor_placement,
    poison_dataset,
    retrain_victim,
    run_backdoor,
    select_trigger,
    train_benign,
)
from .gnn import GnnModel, TrainConfig
from .graph import Dataset, Graph, Split, erdos_renyi_graph
from .metrics import MetricsRow, evaluate_attack
from .motifs import dataset_distribution
from .seeds import derive_seed

ER_DENSITY = 0.8


class AttackKind(str, Enum):
    MOTIF_BACKDOOR = "motif-backdoor"
    ER_B = "er-b"
    MAXDCC = "maxdcc"
    MOTIF_R = "motif-r"

    def __str__(self) -> str:
        return self.value


def er_b_trigger(n: int = 4, density: float = ER_DENSITY, seed: int = 0, max_edges: int = 6) -> Trigger:
    """Erdos-Renyi draw on ``n`` nodes, redrawn until connected.

    Trigger nodes are relabelled by descending degree (stable in id) to match
    the positional plan convention.
    """
    if not 2 <= n <= 4:
        raise ValueError("ER trigger needs 2 to 4 nodes")
    if density <= 0.0:
        raise ValueError("density 0 never yields a connected trigger")
    rng = np.random.default_rng(seed)
    while True:
        g = erdos_renyi_graph(n, density, rng)
        if g.is_connected() and g.num_edges <= max_edges:
            break
    deg = g.degrees()
    order = sorted(range(n), key=lambda i: (-deg[i], i))
    return Trigger(g.permuted([order.index(i) for i in range(n)]), "ER", max_edges)


def place_random(graph: Graph, trigger: Trigger | int, seed: int | np.random.Generator) -> InjectionPlan:
    t = trigger.num_nodes if isinstance(trigger, Trigger) else int(trigger)
    if graph.num_nodes < t:
        raise ValueError(f"graph has {graph.num_nodes} nodes, trigger needs {t}")
    rng = np.random.default_rng(seed)
    return InjectionPlan(rng.choice(graph.num_nodes, size=t, replace=False))


def place_maxdcc(graph: Graph, trigger: Trigger | int, rng: object = None) -> InjectionPlan:
    t = trigger.num_nodes if isinstance(trigger, Trigger) else int(trigger)
    if graph.num_nodes < t:
        raise ValueError(f"graph has {graph.num_nodes} nodes, trigger needs {t}")
    return InjectionPlan(candidate_nodes(graph, t))


def _motif_trigger(dataset: Dataset, split: Split, config: BackdoorConfig) -> Trigger:
    ava = dataset.subset(available_indices(split, config))
    return select_trigger(dataset_distribution(ava, config.target_label), config.trigger_max_edges)


def run_attack(
    kind: AttackKind | str,
    dataset: Dataset,
    split: Split,
    victim_arch: str,
    config: BackdoorConfig,
    train_config: TrainConfig,
    benign: GnnModel | None = None,
    trigger: Trigger | None = None,
) -> AttackOutcome:
    """Poison and retrain with the trigger source and placement of ``kind``.

    ``trigger`` overrides the kind's own trigger source (used by motif scans
    and the series grid).
    """
    kind = AttackKind(kind)
    if kind is AttackKind.MOTIF_BACKDOOR and trigger is None:
        return run_backdoor(dataset, split, victim_arch, config, train_config, benign)
    if benign is None:
        try:
            benign = train_benign(dataset, split, victim_arch, train_config)
        except Exception as exc:
            raise AttackError("benign-training", str(exc)) from exc
    try:
        if trigger is None:
            if kind is AttackKind.ER_B:
                trigger = er_b_trigger(4, ER_DENSITY, derive_seed(config.seed, "er-trigger"), config.trigger_max_edges)
            else:
                trigger = _motif_trigger(dataset, split, config)
    except Exception as exc:
        raise AttackError("trigger-selection", str(exc)) from exc

    placement: Placement
    if kind is AttackKind.MAXDCC:
        placement = place_maxdcc
    elif kind is AttackKind.MOTIF_BACKDOOR:
        # explicit trigger with the full shadow-guided placement
        oracle = BlackBoxTarget(benign)
        ava = dataset.subset(available_indices(split, config))
        cfg = TrainConfig(train_config.learning_rate, train_config.epochs, train_config.batch_size, derive_seed(config.seed, "shadow-train"))
        shadow = build_shadow(oracle, ava, cfg, dataset.num_classes)
        placement = motif_backdoor_placement(shadow, config.filter_count)
    else:
        placement = place_random
    try:
        poisoned, manifest = poison_dataset(dataset.subset(split.train_idx), trigger, config, placement, split.train_idx)
    except Exception as exc:
        raise AttackError("poisoning", str(exc)) from exc
    try:
        model = retrain_victim(benign, dataset, split, poisoned, train_config)
    except Exception as exc:
        raise AttackError("victim-retraining", str(exc)) from exc
    audit = {}
    if kind is AttackKind.MOTIF_BACKDOOR:
        audit = dict(query_count=oracle.query_count, blocked_reads=oracle.blocked_reads, num_available=len(ava), shadow=shadow)
    return AttackOutcome(model, benign, trigger, manifest, placement, **audit)


def run_baseline(
    kind: AttackKind | str,
    dataset: Dataset,
    split: Split,
    victim_arch: str,
    config: BackdoorConfig,
    train_config: TrainConfig,
    benign: GnnModel | None = None,
) -> tuple[GnnModel, MetricsRow]:
    out = run_attack(kind, dataset, split, victim_arch, config, train_config, benign)
    row = evaluate_attack(
        out.model, out.benign, dataset.subset(split.test_idx), out.trigger, out.placement, config.target_label, config.seed
    )
    return out.model, row
