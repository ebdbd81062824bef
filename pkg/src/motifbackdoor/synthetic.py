"""Generated corpora that exercise the pipeline without downloads."""

from __future__ import annotations

import numpy as np

from .graph import DEFAULT_MAX_DEGREE, Dataset, Graph
from .motifs import MotifId, motif_graph

TREE_CLASS = 0
CYCLE_CLASS = 1


def random_tree(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Random recursive tree: node ``i`` hangs off a uniformly chosen earlier node."""
    return [(int(rng.integers(i)), i) for i in range(1, n)]


def cycle_rich_edges(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Two or more fused hexagons plus pendant tree nodes; no 3- or 4-cycles.

    Each new hexagon is fused onto a random perimeter edge whose endpoints both
    have degree 2, which keeps every other cycle through it at length >= 10.
    """
    if n < 10:
        raise ValueError("a cycle-rich graph needs at least 10 nodes")
    num_rings = int(rng.integers(2, (n - 2) // 4 + 1))
    edges = [(i, (i + 1) % 6) for i in range(6)]
    deg = [2] * 6
    for _ in range(num_rings - 1):
        free = [(u, v) for u, v in edges if deg[u] == 2 and deg[v] == 2]
        u, v = free[int(rng.integers(len(free)))]
        w = len(deg)
        path = [u, w, w + 1, w + 2, w + 3, v]
        edges += list(zip(path[:-1], path[1:]))
        deg += [2, 2, 2, 2]
        deg[u] += 1
        deg[v] += 1
    for v in range(len(deg), n):
        edges.append((int(rng.integers(v)), v))
    return edges


def _finish(n: int, edges, label: int, rng: np.random.Generator, max_degree: int) -> Graph:
    perm = rng.permutation(n)
    return Graph(n, [(perm[u], perm[v]) for u, v in edges], None, label, degree_cap=max_degree)


def smoke_corpus(
    num_graphs: int = 200,
    seed: int = 0,
    min_nodes: int = 10,
    max_nodes: int = 20,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> Dataset:
    """Balanced two-class corpus: random trees (class 0) versus fused-hexagon graphs (class 1).

    Neither class contains a triangle or 4-cycle, so every cyclic 3/4-node motif
    is absent from the corpus.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(num_graphs):
        n = int(rng.integers(min_nodes, max_nodes + 1))
        label = i % 2
        edges = random_tree(n, rng) if label == TREE_CLASS else cycle_rich_edges(n, rng)
        graphs.append(_finish(n, edges, label, rng, max_degree))
    return Dataset("smoke", tuple(graphs), 2, max_degree + 1)


def tree_corpus(num_graphs: int = 200, seed: int = 0, min_nodes: int = 10, max_nodes: int = 20) -> Dataset:
    """Two classes of trees separated by shape: path-like versus star-like."""
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(num_graphs):
        n = int(rng.integers(min_nodes, max_nodes + 1))
        label = i % 2
        if label == 0:
            # caterpillar-ish: mostly attach to one of the last three nodes
            edges = [(int(max(0, v - 1 - rng.integers(3))), v) for v in range(1, n)]
        else:
            hubs = int(rng.integers(1, 3))
            edges = [(0, v) for v in range(1, hubs)] + [(int(rng.integers(hubs)), v) for v in range(hubs, n)]
        graphs.append(_finish(n, edges, label, rng, DEFAULT_MAX_DEGREE))
    return Dataset("trees", tuple(graphs), 2, DEFAULT_MAX_DEGREE + 1)


def planted_motif_corpus(
    num_graphs: int = 200,
    seed: int = 0,
    motif: MotifId = MotifId.M41,
    plants: tuple[int, int] = (6, 1),
    min_nodes: int = 12,
    max_nodes: int = 20,
    background: tuple[MotifId, ...] = (),
) -> Dataset:
    """Random trees where class ``c`` carries ``plants[c]`` extra pendant copies of ``motif``.

    Every graph of both classes also gets one pendant copy of each ``background``
    motif, so those motifs are present but carry no class signal.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(num_graphs):
        label = i % 2
        n = int(rng.integers(min_nodes, max_nodes + 1))
        edges = random_tree(n, rng)
        for m in [motif] * plants[label] + list(background):
            pattern = motif_graph(m)
            edges += [(u + n, v + n) for u, v in pattern.edges]
            edges.append((int(rng.integers(n)), n + int(rng.integers(pattern.num_nodes))))
            n += pattern.num_nodes
        graphs.append(_finish(n, edges, label, rng, DEFAULT_MAX_DEGREE))
    return Dataset(f"planted_{motif.value}", tuple(graphs), 2, DEFAULT_MAX_DEGREE + 1)
