"""Graph and dataset containers, TU-format ingestion, splitting and graph edits.

Graphs are immutable values. Every edit (node dropping, trigger wiring, edge
pruning) returns a new :class:`Graph`; the original is never touched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MAX_DEGREE = 10


class DatasetFormatError(ValueError):
    """Malformed TU-format input; the message names file and line."""


def _canonical_edges(num_nodes: int, edges: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    out = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop on node {u}")
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise ValueError(f"edge ({u}, {v}) out of range for {num_nodes} nodes")
        out.add((u, v) if u < v else (v, u))
    return tuple(sorted(out))


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with a node-feature matrix and optional class label.

    With ``degree_cap`` set, features are the degree one-hot encoding and are
    re-derived from the structure on every edit instead of being carried over.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...] = ()
    features: np.ndarray | None = None
    label: int | None = None
    degree_cap: int | None = None

    def __post_init__(self) -> None:
        n = int(self.num_nodes)
        if n < 0:
            raise ValueError("num_nodes must be nonnegative")
        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", _canonical_edges(n, self.edges))
        if self.degree_cap is not None:
            feats = degree_one_hot(self, int(self.degree_cap))
        elif self.features is None:
            feats = np.zeros((n, 0))
        else:
            feats = np.array(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise ValueError(f"features must have shape ({n}, d), got {feats.shape}")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def neighbors(self) -> tuple[frozenset[int], ...]:
        adj: list[set[int]] = [set() for _ in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return tuple(frozenset(s) for s in adj)

    def degrees(self) -> np.ndarray:
        return np.array([len(s) for s in self.neighbors], dtype=np.int64)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        if self.edges:
            idx = np.array(self.edges)
            a[idx[:, 0], idx[:, 1]] = 1.0
            a[idx[:, 1], idx[:, 0]] = 1.0
        return a

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.neighbors[u]

    def is_connected(self) -> bool:
        if self.num_nodes == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            for w in self.neighbors[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.num_nodes

    def with_edges(self, edges: Iterable[tuple[int, int]]) -> Graph:
        return Graph(self.num_nodes, tuple(edges), self.features, self.label, self.degree_cap)

    def with_features(self, features: np.ndarray) -> Graph:
        return Graph(self.num_nodes, self.edges, features, self.label)

    def with_label(self, label: int | None) -> Graph:
        return Graph(self.num_nodes, self.edges, self.features, label, self.degree_cap)

    def permuted(self, perm: Sequence[int]) -> Graph:
        """Relabel node ``i`` as ``perm[i]``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.num_nodes)):
            raise ValueError("perm must be a permutation of the node ids")
        feats = np.empty_like(self.features)
        feats[perm] = self.features
        return Graph(self.num_nodes, [(perm[u], perm[v]) for u, v in self.edges], feats, self.label, self.degree_cap)

    def same_structure(self, other: Graph) -> bool:
        return self.num_nodes == other.num_nodes and self.edges == other.edges

    def __repr__(self) -> str:
        return f"Graph(n={self.num_nodes}, m={self.num_edges}, d={self.feature_dim}, label={self.label})"


@dataclass(frozen=True)
class Dataset:
    name: str
    graphs: tuple[Graph, ...]
    num_classes: int
    feature_dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for i, g in enumerate(self.graphs):
            if g.label is None or not 0 <= g.label < self.num_classes:
                raise ValueError(f"graph {i} has label {g.label} outside [0, {self.num_classes})")
            if g.feature_dim != self.feature_dim:
                raise ValueError(f"graph {i} has feature_dim {g.feature_dim}, expected {self.feature_dim}")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> list[Graph]:
        return [self.graphs[i] for i in indices]


@dataclass(frozen=True)
class Split:
    train_idx: tuple[int, ...]
    val_idx: tuple[int, ...]
    test_idx: tuple[int, ...]

    def __post_init__(self) -> None:
        parts = [set(self.train_idx), set(self.val_idx), set(self.test_idx)]
        if sum(map(len, parts)) != len(set().union(*parts)):
            raise ValueError("split parts overlap")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train_idx), len(self.val_idx), len(self.test_idx)


@dataclass
class AvailableData:
    """Attacker-visible graphs, optionally paired with queried confidence vectors."""

    graphs: list[Graph]
    soft_labels: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        if self.soft_labels is not None:
            s = np.asarray(self.soft_labels, dtype=np.float64)
            if s.shape[0] != len(self.graphs):
                raise ValueError("one soft label row per graph required")
            if (s < 0).any() or not np.allclose(s.sum(axis=1), 1.0, atol=1e-6):
                raise ValueError("soft labels must be probability vectors")
            self.soft_labels = s


def degree_one_hot(graph: Graph, max_degree: int = DEFAULT_MAX_DEGREE) -> np.ndarray:
    """One-hot of ``min(degree, max_degree)``; ``max_degree + 1`` columns."""
    deg = np.minimum(graph.degrees(), max_degree)
    out = np.zeros((graph.num_nodes, max_degree + 1))
    out[np.arange(graph.num_nodes), deg] = 1.0
    return out


# --- TU text format -------------------------------------------------------


def _read_lines(path: Path) -> list[tuple[int, str]]:
    with open(path) as fh:
        return [(i, ln.strip()) for i, ln in enumerate(fh, start=1) if ln.strip()]


def _parse_ints(path: Path, lineno: int, text: str, count: int | None = None) -> list[int]:
    try:
        vals = [int(float(tok)) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise DatasetFormatError(f"{path.name}:{lineno}: not an integer row: {text!r}") from None
    if count is not None and len(vals) != count:
        raise DatasetFormatError(f"{path.name}:{lineno}: expected {count} values, got {len(vals)}")
    return vals


def load_tu_dataset(dir_path: str | Path, name: str, max_degree: int = DEFAULT_MAX_DEGREE) -> Dataset:
    """Read a TU Dortmund graph-classification dataset.

    Node labels become one-hot features when ``<name>_node_labels.txt`` exists;
    otherwise the degree one-hot encoding (capped at ``max_degree``) is used.
    Raw graph labels are remapped to ``0..C-1`` in sorted order.
    """
    root = Path(dir_path)
    paths = {k: root / f"{name}_{k}.txt" for k in ("A", "graph_indicator", "graph_labels", "node_labels")}
    for key in ("A", "graph_indicator", "graph_labels"):
        if not paths[key].exists():
            raise DatasetFormatError(f"missing mandatory file {paths[key]}")

    indicator = [_parse_ints(paths["graph_indicator"], ln, t, 1)[0] for ln, t in _read_lines(paths["graph_indicator"])]
    raw_labels = [_parse_ints(paths["graph_labels"], ln, t, 1)[0] for ln, t in _read_lines(paths["graph_labels"])]
    num_graphs = len(raw_labels)
    num_total = len(indicator)

    node_graph = np.array(indicator, dtype=np.int64) - 1
    if num_total and (node_graph.min() < 0 or node_graph.max() >= num_graphs):
        bad = int(np.flatnonzero((node_graph < 0) | (node_graph >= num_graphs))[0])
        raise DatasetFormatError(
            f"{paths['graph_indicator'].name}:{bad + 1}: graph id {indicator[bad]} "
            f"does not match {num_graphs} rows of {paths['graph_labels'].name}"
        )
    counts = np.bincount(node_graph, minlength=num_graphs)
    if (counts == 0).any():
        g = int(np.flatnonzero(counts == 0)[0])
        raise DatasetFormatError(
            f"{paths['graph_labels'].name}:{g + 1}: graph {g + 1} has no nodes in {paths['graph_indicator'].name}"
        )
    offsets = np.concatenate([[0], np.cumsum(counts)])
    # TU files list nodes grouped by graph; local id = global id - first id of the graph
    local = np.arange(num_total) - offsets[node_graph]
    if (local < 0).any() or (local >= counts[node_graph]).any():
        raise DatasetFormatError(f"{paths['graph_indicator'].name}: nodes are not grouped contiguously by graph")

    edge_lists: list[list[tuple[int, int]]] = [[] for _ in range(num_graphs)]
    for ln, text in _read_lines(paths["A"]):
        u, v = _parse_ints(paths["A"], ln, text, 2)
        if not (1 <= u <= num_total and 1 <= v <= num_total):
            raise DatasetFormatError(f"{paths['A'].name}:{ln}: edge ({u}, {v}) references unknown node")
        gu, gv = node_graph[u - 1], node_graph[v - 1]
        if gu != gv:
            raise DatasetFormatError(f"{paths['A'].name}:{ln}: edge ({u}, {v}) crosses graphs {gu + 1} and {gv + 1}")
        if u != v:
            edge_lists[gu].append((int(local[u - 1]), int(local[v - 1])))

    node_feats = None
    if paths["node_labels"].exists():
        rows = _read_lines(paths["node_labels"])
        if len(rows) != num_total:
            raise DatasetFormatError(
                f"{paths['node_labels'].name}:{len(rows)}: {len(rows)} node labels for {num_total} nodes"
            )
        nl = np.array([_parse_ints(paths["node_labels"], ln, t)[0] for ln, t in rows])
        vocab, codes = np.unique(nl, return_inverse=True)
        node_feats = np.zeros((num_total, len(vocab)))
        node_feats[np.arange(num_total), codes] = 1.0

    classes = sorted(set(raw_labels))
    remap = {c: i for i, c in enumerate(classes)}
    graphs = []
    for g in range(num_graphs):
        n = int(counts[g])
        if node_feats is not None:
            graphs.append(Graph(n, edge_lists[g], node_feats[offsets[g] : offsets[g + 1]], remap[raw_labels[g]]))
        else:
            graphs.append(Graph(n, edge_lists[g], None, remap[raw_labels[g]], degree_cap=max_degree))
    feature_dim = graphs[0].feature_dim if graphs else 0
    return Dataset(name, tuple(graphs), len(classes), feature_dim)


def write_tu_dataset(dataset: Dataset, dir_path: str | Path, node_labels: bool = False) -> Path:
    """Write ``dataset`` in TU text format. Node labels are feature argmaxes."""
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    name = dataset.name
    offset = 0
    with open(root / f"{name}_A.txt", "w") as fa, open(root / f"{name}_graph_indicator.txt", "w") as fi, open(
        root / f"{name}_graph_labels.txt", "w"
    ) as fl:
        for gi, g in enumerate(dataset.graphs, start=1):
            for u, v in g.edges:
                fa.write(f"{u + offset + 1}, {v + offset + 1}\n")
                fa.write(f"{v + offset + 1}, {u + offset + 1}\n")
            fi.writelines(f"{gi}\n" for _ in range(g.num_nodes))
            fl.write(f"{g.label}\n")
            offset += g.num_nodes
    if node_labels:
        with open(root / f"{name}_node_labels.txt", "w") as fn:
            for g in dataset.graphs:
                fn.writelines(f"{int(x)}\n" for x in g.features.argmax(axis=1))
    return root


# --- splitting and generation ---------------------------------------------


def split_dataset(
    dataset: Dataset | int, ratios: tuple[float, float, float] = (0.75, 0.05, 0.20), seed: int = 0
) -> Split:
    """Seeded shuffled split. Validation and test sizes are floored; train takes the rest."""
    n = dataset if isinstance(dataset, int) else len(dataset)
    if len(ratios) != 3 or min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n_val = math.floor(n * ratios[1] + 1e-9)
    n_test = math.floor(n * ratios[2] + 1e-9)
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"dataset of {n} graphs too small for ratios {ratios}")
    order = np.random.default_rng(seed).permutation(n)
    return Split(
        tuple(int(i) for i in order[:n_train]),
        tuple(int(i) for i in order[n_train : n_train + n_val]),
        tuple(int(i) for i in order[n_train + n_val :]),
    )


def erdos_renyi_graph(n: int, density: float, seed: int | np.random.Generator) -> Graph:
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = rng.random(len(pairs)) < density
    return Graph(n, [p for p, k in zip(pairs, keep) if k])


def drop_node(graph: Graph, r: int) -> Graph:
    if not 0 <= r < graph.num_nodes:
        raise IndexError(f"node {r} out of range for {graph.num_nodes} nodes")
    keep = [i for i in range(graph.num_nodes) if i != r]
    return induced_subgraph(graph, keep)


def induced_subgraph(graph: Graph, nodes: Sequence[int]) -> Graph:
    nodes = [int(v) for v in nodes]
    if len(set(nodes)) != len(nodes):
        raise ValueError("duplicate node ids")
    if any(not 0 <= v < graph.num_nodes for v in nodes):
        raise IndexError("node id out of range")
    pos = {v: i for i, v in enumerate(nodes)}
    edges = [(pos[u], pos[v]) for u, v in graph.edges if u in pos and v in pos]
    return Graph(len(nodes), edges, graph.features[nodes], graph.label, graph.degree_cap)
