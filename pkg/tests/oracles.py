"""Reference implementations used only by the tests.

Each one takes a different route from the library code: networkx isomorphism
instead of degree-sequence classification, full subset enumeration instead of
neighbourhood expansion, dense matrix surgery instead of edge-list edits, and
central finite differences instead of backprop.
"""

from __future__ import annotations

from itertools import combinations

import networkx as nx
import numpy as np

from motifbackdoor.graph import Graph

# canonical shapes built with networkx generators, not the library's edge lists
REFERENCE_SHAPES = {
    "M31": nx.path_graph(3),
    "M32": nx.complete_graph(3),
    "M41": nx.path_graph(4),
    "M42": nx.star_graph(3),
    "M43": nx.cycle_graph(4),
    "M44": nx.Graph([(0, 1), (1, 2), (0, 2), (2, 3)]),
    "M45": nx.complete_graph(4),
    "M46": nx.complete_graph(4),
}
REFERENCE_SHAPES["M45"].remove_edge(0, 1)


def to_nx(graph: Graph) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(graph.num_nodes))
    g.add_edges_from(graph.edges)
    return g


def classify_nx(sub: nx.Graph) -> str:
    hits = [name for name, ref in REFERENCE_SHAPES.items() if nx.is_isomorphic(sub, ref)]
    assert len(hits) == 1, hits
    return hits[0]


def brute_force_counts(graph: Graph) -> dict[str, int]:
    """Induced counts over all C(n,3) + C(n,4) node subsets."""
    g = to_nx(graph)
    counts = dict.fromkeys(REFERENCE_SHAPES, 0)
    for k in (3, 4):
        for nodes in combinations(range(graph.num_nodes), k):
            sub = g.subgraph(nodes)
            if nx.is_connected(sub):
                counts[classify_nx(sub)] += 1
    return counts


def dense_drop(adj: np.ndarray, r: int) -> np.ndarray:
    keep = [i for i in range(adj.shape[0]) if i != r]
    return adj[np.ix_(keep, keep)]


def dense_induced(adj: np.ndarray, nodes) -> np.ndarray:
    return adj[np.ix_(list(nodes), list(nodes))]


def numeric_grad(loss_fn, params: dict[str, np.ndarray], h: float = 1e-5) -> dict[str, np.ndarray]:
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            up = loss_fn()
            p[i] = old - h
            down = loss_fn()
            p[i] = old
            g[i] = (up - down) / (2 * h)
        out[name] = g
    return out


def reference_gcn_probs(params: dict[str, np.ndarray], graph: Graph, layers: int = 2) -> np.ndarray:
    """Dense per-graph GCN forward pass, written out from the propagation rule."""
    a = graph.adjacency() + np.eye(graph.num_nodes)
    d = a.sum(axis=1)
    s = a / np.sqrt(np.outer(d, d))
    h = graph.features
    for l in range(layers):
        h = np.maximum(s @ h @ params[f"W{l}"] + params[f"b{l}"], 0)
    z = h.sum(axis=0) @ params["Wout"] + params["bout"]
    e = np.exp(z - z.max())
    return e / e.sum()


def reference_gin_probs(params: dict[str, np.ndarray], graph: Graph, layers: int = 2) -> np.ndarray:
    a = graph.adjacency()
    h = graph.features
    for l in range(layers):
        agg = h + a @ h
        h = np.maximum(np.maximum(agg @ params[f"Wa{l}"] + params[f"ba{l}"], 0) @ params[f"Wb{l}"] + params[f"bb{l}"], 0)
    z = h.sum(axis=0) @ params["Wout"] + params["bout"]
    e = np.exp(z - z.max())
    return e / e.sum()
