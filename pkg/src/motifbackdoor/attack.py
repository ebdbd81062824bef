"""Motif-Backdoor: motif-statistics trigger choice, centrality and shadow-model
guided injection positions, trigger mixing, poisoning and victim retraining.

The attacker never holds the victim model. It sees a :class:`BlackBoxTarget`,
which answers confidence queries and nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .gnn import GnnModel, Prediction, TrainConfig, init_model, train
from .graph import AvailableData, Dataset, Graph, Split, drop_node
from .motifs import MOTIFS, MotifDistribution, MotifId, dataset_distribution, motif_graph
from .seeds import derive_seed

MAX_TRIGGER_NODES = 4


class AttackError(RuntimeError):
    """Pipeline failure, tagged with the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class Trigger:
    topology: Graph
    motif: MotifId | str = "custom"
    max_edges: int = 6

    def __post_init__(self) -> None:
        if self.topology.num_nodes > MAX_TRIGGER_NODES:
            raise ValueError(f"trigger has {self.topology.num_nodes} nodes, limit is {MAX_TRIGGER_NODES}")
        if self.topology.num_edges > self.max_edges:
            raise ValueError(f"trigger has {self.topology.num_edges} edges, limit is {self.max_edges}")

    @property
    def num_nodes(self) -> int:
        return self.topology.num_nodes

    @property
    def name(self) -> str:
        return str(self.motif)

    @classmethod
    def from_motif(cls, motif: MotifId | str, max_edges: int = 6) -> Trigger:
        return cls(motif_graph(motif), MotifId(motif), max_edges)


@dataclass
class BackdoorConfig:
    target_label: int = 0
    poison_rate: float = 0.1
    filter_count: int = 10
    trigger_max_edges: int = 6
    seed: int = 0
    available_fraction: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.poison_rate < 1.0:
            raise ValueError("poison_rate must lie in (0, 1)")
        if not 0.0 < self.available_fraction <= 1.0:
            raise ValueError("available_fraction must lie in (0, 1]")
        if self.filter_count < 1:
            raise ValueError("filter_count must be at least 1")


@dataclass(frozen=True)
class InjectionPlan:
    node_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "node_ids", tuple(int(v) for v in self.node_ids))
        if len(set(self.node_ids)) != len(self.node_ids):
            raise ValueError("plan node ids must be distinct")

    def __len__(self) -> int:
        return len(self.node_ids)


# (graph, trigger, rng) -> plan
Placement = Callable[[Graph, Trigger, np.random.Generator], InjectionPlan]


class BlackBoxTarget:
    """Query-only view of a victim model.

    Counts queries, and counts then refuses any attempt to reach attributes
    beyond the query interface.
    """

    __slots__ = ("_query", "query_count", "blocked_reads")

    def __init__(self, model: GnnModel | Callable[[Graph], Prediction]):
        fn = model.__call__ if isinstance(model, GnnModel) else model
        object.__setattr__(self, "_query", fn)
        object.__setattr__(self, "query_count", 0)
        object.__setattr__(self, "blocked_reads", 0)

    def __call__(self, graph: Graph) -> Prediction:
        object.__setattr__(self, "query_count", self.query_count + 1)
        return self._query(graph)

    def __getattr__(self, name: str):
        object.__setattr__(self, "blocked_reads", self.blocked_reads + 1)
        raise AttributeError(f"black-box target exposes no attribute {name!r}")


@dataclass
class ShadowModel:
    model: GnnModel
    available: AvailableData = field(repr=False)

    def probs(self, graphs: Sequence[Graph]) -> np.ndarray:
        return self.model.predict_proba(list(graphs))

    def __call__(self, graph: Graph) -> np.ndarray:
        return self.probs([graph])[0]


# --- trigger structure ---------------------------------------------------------


def select_trigger(dist: MotifDistribution, m: int) -> Trigger:
    """Pick the trigger motif by (absent from data, tar-oth surplus, edge count, id order)."""
    allowed = [mo for mo in MOTIFS if mo.num_edges <= m]
    if not allowed:
        raise ValueError(f"no motif has at most {m} edges")
    order = {mo: i for i, mo in enumerate(MOTIFS)}
    best = min(
        allowed,
        key=lambda mo: (mo not in dist.absent_in_dataset, -dist.diff(mo), -mo.num_edges, order[mo]),
    )
    return Trigger.from_motif(best, m)


# --- injection position ----------------------------------------------------------


def degree_centrality(graph: Graph) -> np.ndarray:
    n = graph.num_nodes
    if n < 2:
        raise ValueError("degree centrality needs at least 2 nodes")
    return graph.degrees() / (n - 1)


def candidate_nodes(graph: Graph, k: int) -> list[int]:
    """Top-``k`` nodes by degree centrality, ties to the lower id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    # ranking by raw degree is identical to ranking by degree / (N - 1)
    deg = graph.degrees()
    order = sorted(range(graph.num_nodes), key=lambda i: (-deg[i], i))
    return order[:k]


def build_shadow(
    target_query: Callable[[Graph], Prediction],
    available: AvailableData | Sequence[Graph],
    config: TrainConfig,
    num_classes: int | None = None,
    hidden_dim: int = 32,
    num_layers: int = 2,
) -> ShadowModel:
    """Query the target once per available graph and distil a GCN on its confidences."""
    graphs = list(available.graphs if isinstance(available, AvailableData) else available)
    if not graphs:
        raise ValueError("no available graphs to query")
    soft = []
    for i, g in enumerate(graphs):
        try:
            soft.append(np.asarray(target_query(g).probs, dtype=np.float64))
        except Exception as exc:
            raise AttackError("shadow", f"target query failed on available graph {i}: {exc}") from exc
    soft_labels = np.vstack(soft)
    data = AvailableData(graphs, soft_labels)
    c = num_classes or soft_labels.shape[1]
    model = init_model("gcn", graphs[0].feature_dim, c, derive_seed(config.seed, "shadow-init"), hidden_dim, num_layers)
    cfg = TrainConfig(config.learning_rate, config.epochs, config.batch_size, config.seed, "soft_cross_entropy")
    return ShadowModel(train(model, graphs, soft_labels, cfg), data)


def subscores(shadow: ShadowModel, graph: Graph, nodes: Sequence[int]) -> np.ndarray:
    """L1 change of the shadow's class probabilities when each node is dropped."""
    nodes = list(nodes)
    if graph.num_nodes < 2:
        raise ValueError("dropping a node would empty the graph")
    variants = [graph] + [drop_node(graph, r) for r in nodes]
    probs = shadow.probs(variants)
    return np.abs(probs[1:] - probs[0]).sum(axis=1)


def subscore(shadow: ShadowModel, graph: Graph, r: int) -> float:
    return float(subscores(shadow, graph, [r])[0])


def rank_by_score(candidates: Sequence[int], scores: Sequence[float], t: int) -> InjectionPlan:
    if len(candidates) < t:
        raise ValueError(f"{len(candidates)} candidates for a {t}-node trigger")
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
    return InjectionPlan([candidates[i] for i in order[:t]])


def select_injection_nodes(shadow: ShadowModel, graph: Graph, candidates: Sequence[int], t: int) -> InjectionPlan:
    if graph.num_nodes < t:
        raise ValueError(f"graph has {graph.num_nodes} nodes, trigger needs {t}")
    return rank_by_score(list(candidates), subscores(shadow, graph, candidates), t)


def motif_backdoor_placement(shadow: ShadowModel, k: int) -> Placement:
    def place(graph: Graph, trigger: Trigger, rng: np.random.Generator | None = None) -> InjectionPlan:
        cands = candidate_nodes(graph, max(k, trigger.num_nodes))
        return select_injection_nodes(shadow, graph, cands, trigger.num_nodes)

    return place


# --- mixing and poisoning -----------------------------------------------------------


def inject_trigger(graph: Graph, trigger: Trigger | Graph, plan: InjectionPlan | Sequence[int]) -> Graph:
    """Rewire the plan nodes so their induced subgraph is exactly the trigger.

    ``plan[i]`` takes the role of trigger node ``i``. Edges to the rest of the
    graph and all node features are left alone.
    """
    topo = trigger.topology if isinstance(trigger, Trigger) else trigger
    nodes = plan.node_ids if isinstance(plan, InjectionPlan) else tuple(plan)
    if len(nodes) != topo.num_nodes:
        raise ValueError(f"plan has {len(nodes)} nodes, trigger has {topo.num_nodes}")
    if any(not 0 <= v < graph.num_nodes for v in nodes):
        raise IndexError("plan node out of range")
    inside = set(nodes)
    kept = [(u, v) for u, v in graph.edges if not (u in inside and v in inside)]
    added = [(nodes[u], nodes[v]) for u, v in topo.edges]
    return graph.with_edges(kept + added)


@dataclass
class ManifestEntry:
    index: int
    plan: tuple[int, ...]
    trigger: str
    original_label: int
    edges_before: list[tuple[int, int]]
    edges_after: list[tuple[int, int]]

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "plan": list(self.plan),
            "trigger": self.trigger,
            "original_label": self.original_label,
            "edges_before": [list(e) for e in self.edges_before],
            "edges_after": [list(e) for e in self.edges_after],
        }


def poison_count(num_train: int, poison_rate: float) -> int:
    return int(np.floor(poison_rate * num_train + 1e-9))


def poison_dataset(
    train_graphs: Sequence[Graph],
    trigger: Trigger,
    config: BackdoorConfig,
    placement: Placement,
    indices: Sequence[int] | None = None,
) -> tuple[list[Graph], list[ManifestEntry]]:
    """Replace ``floor(p * |train|)`` non-target graphs by triggered copies relabelled to the target.

    ``indices`` maps positions in ``train_graphs`` to dataset indices for the manifest.
    """
    train_graphs = list(train_graphs)
    indices = list(range(len(train_graphs))) if indices is None else list(indices)
    n_poison = poison_count(len(train_graphs), config.poison_rate)
    if n_poison == 0:
        raise ValueError(f"poison rate {config.poison_rate} selects no graph out of {len(train_graphs)}")
    pool = [i for i, g in enumerate(train_graphs) if g.label != config.target_label]
    if len(pool) < n_poison:
        raise ValueError(f"need {n_poison} non-target graphs to poison, only {len(pool)} available")
    rng = np.random.default_rng(derive_seed(config.seed, "poison-sample"))
    chosen = sorted(int(i) for i in rng.choice(pool, size=n_poison, replace=False))
    place_rng = np.random.default_rng(derive_seed(config.seed, "poison-place"))
    out = list(train_graphs)
    manifest = []
    for i in chosen:
        g = train_graphs[i]
        plan = placement(g, trigger, place_rng)
        bad = inject_trigger(g, trigger, plan).with_label(config.target_label)
        out[i] = bad
        manifest.append(ManifestEntry(indices[i], plan.node_ids, trigger.name, int(g.label), list(g.edges), list(bad.edges)))
    return out, manifest


# --- full pipeline --------------------------------------------------------------------


def train_benign(
    dataset: Dataset, split: Split, arch: str, config: TrainConfig, hidden_dim: int = 32, num_layers: int = 2
) -> GnnModel:
    train_g = dataset.subset(split.train_idx)
    val_g = dataset.subset(split.val_idx)
    model = init_model(arch, dataset.feature_dim, dataset.num_classes, derive_seed(config.seed, "benign-init"), hidden_dim, num_layers)
    cfg = TrainConfig(config.learning_rate, config.epochs, config.batch_size, derive_seed(config.seed, "benign-train"))
    return train(model, train_g, [g.label for g in train_g], cfg, val=(val_g, [g.label for g in val_g]))


def available_indices(split: Split, config: BackdoorConfig) -> list[int]:
    idx = list(split.train_idx)
    if config.available_fraction >= 1.0:
        return idx
    rng = np.random.default_rng(derive_seed(config.seed, "available"))
    n = max(1, int(np.floor(config.available_fraction * len(idx))))
    return [idx[i] for i in sorted(rng.choice(len(idx), size=n, replace=False))]


def retrain_victim(
    benign: GnnModel, dataset: Dataset, split: Split, poisoned: Sequence[Graph], config: TrainConfig
) -> GnnModel:
    """Warm-start the benign parameters and keep training on the poisoned set."""
    val_g = dataset.subset(split.val_idx)
    cfg = TrainConfig(config.learning_rate, config.epochs, config.batch_size, derive_seed(config.seed, "victim-train"))
    return train(benign, list(poisoned), [g.label for g in poisoned], cfg, val=(val_g, [g.label for g in val_g]))


@dataclass
class AttackOutcome:
    model: GnnModel
    benign: GnnModel
    trigger: Trigger
    manifest: list[ManifestEntry]
    placement: Placement
    query_count: int = 0
    blocked_reads: int = 0
    num_available: int = 0
    shadow: ShadowModel | None = None


def run_backdoor(
    dataset: Dataset,
    split: Split,
    victim_arch: str,
    config: BackdoorConfig,
    train_config: TrainConfig,
    benign: GnnModel | None = None,
) -> AttackOutcome:
    """Motif-Backdoor end to end: benign target, census, trigger, shadow, poisoning, retraining."""
    try:
        if benign is None:
            benign = train_benign(dataset, split, victim_arch, train_config)
    except Exception as exc:
        raise AttackError("benign-training", str(exc)) from exc
    oracle = BlackBoxTarget(benign)

    ava_idx = available_indices(split, config)
    ava = dataset.subset(ava_idx)
    try:
        dist = dataset_distribution(ava, config.target_label)
        trigger = select_trigger(dist, config.trigger_max_edges)
    except Exception as exc:
        raise AttackError("trigger-selection", str(exc)) from exc
    if config.filter_count < trigger.num_nodes:
        raise AttackError("config", f"filter count {config.filter_count} below trigger size {trigger.num_nodes}")

    shadow_cfg = TrainConfig(train_config.learning_rate, train_config.epochs, train_config.batch_size, derive_seed(config.seed, "shadow-train"))
    try:
        shadow = build_shadow(oracle, ava, shadow_cfg, dataset.num_classes)
    except AttackError:
        raise
    except Exception as exc:
        raise AttackError("shadow", str(exc)) from exc

    placement = motif_backdoor_placement(shadow, config.filter_count)
    try:
        poisoned, manifest = poison_dataset(dataset.subset(split.train_idx), trigger, config, placement, split.train_idx)
    except Exception as exc:
        raise AttackError("poisoning", str(exc)) from exc
    try:
        model = retrain_victim(benign, dataset, split, poisoned, train_config)
    except Exception as exc:
        raise AttackError("victim-retraining", str(exc)) from exc
    return AttackOutcome(
        model, benign, trigger, manifest, placement, oracle.query_count, oracle.blocked_reads, len(ava), shadow
    )
