"""Induced census of the eight connected 3- and 4-node undirected motifs."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .graph import Dataset, Graph


class MotifId(str, Enum):
    M31 = "M31"  # 3-path
    M32 = "M32"  # triangle
    M41 = "M41"  # 4-path
    M42 = "M42"  # 3-star
    M43 = "M43"  # 4-cycle
    M44 = "M44"  # paw: triangle plus pendant
    M45 = "M45"  # diamond: K4 minus one edge
    M46 = "M46"  # K4

    def __str__(self) -> str:
        return self.value

    @property
    def num_nodes(self) -> int:
        return int(self.value[1])

    @property
    def num_edges(self) -> int:
        return len(_MOTIF_EDGES[self])


MOTIFS: tuple[MotifId, ...] = tuple(MotifId)

# Node ids are ordered by descending degree so the positional plan mapping
# (highest-ranked victim node <-> highest-degree trigger node) is well defined.
_MOTIF_EDGES: dict[MotifId, tuple[tuple[int, int], ...]] = {
    MotifId.M31: ((0, 1), (0, 2)),
    MotifId.M32: ((0, 1), (0, 2), (1, 2)),
    MotifId.M41: ((0, 1), (0, 2), (1, 3)),
    MotifId.M42: ((0, 1), (0, 2), (0, 3)),
    MotifId.M43: ((0, 1), (1, 3), (2, 3), (0, 2)),
    MotifId.M44: ((0, 1), (0, 2), (1, 2), (0, 3)),
    MotifId.M45: ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3)),
    MotifId.M46: ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)),
}


def motif_graph(motif: MotifId | str) -> Graph:
    motif = MotifId(motif)
    return Graph(motif.num_nodes, _MOTIF_EDGES[motif])


def _classify(size: int, num_edges: int, max_degree: int) -> MotifId:
    if size == 3:
        return MotifId.M32 if num_edges == 3 else MotifId.M31
    if num_edges == 3:
        return MotifId.M42 if max_degree == 3 else MotifId.M41
    if num_edges == 4:
        return MotifId.M44 if max_degree == 3 else MotifId.M43
    return MotifId.M45 if num_edges == 5 else MotifId.M46


def classify_connected(subgraph: Graph) -> MotifId:
    """Isomorphism class of a connected 3- or 4-node graph.

    Node count, edge count and maximum degree together separate all eight
    classes: the only same-size, same-edge-count pairs are path/star (3 edges)
    and cycle/paw (4 edges), each split by whether a degree-3 node exists.
    """
    n = subgraph.num_nodes
    if n not in (3, 4):
        raise ValueError(f"motifs have 3 or 4 nodes, got {n}")
    if not subgraph.is_connected():
        raise ValueError("subgraph is disconnected")
    return _classify(n, subgraph.num_edges, int(subgraph.degrees().max()))


def connected_subsets(graph: Graph, max_size: int = 4) -> Iterator[tuple[int, ...]]:
    """Yield every connected node set of size 3..max_size exactly once.

    ESU enumeration: a subset is grown only from its smallest node, and a
    node enters the extension set only through the first subset member it is
    adjacent to, so no set is produced twice.
    """
    nbrs = graph.neighbors

    def extend(sub: tuple[int, ...], ext: list[int], root: int, closed: frozenset[int]) -> Iterator[tuple[int, ...]]:
        if len(sub) >= 3:
            yield sub
        if len(sub) == max_size:
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            # exclusive neighbours of w: not in sub and not adjacent to sub
            new = [u for u in nbrs[w] if u > root and u not in closed]
            yield from extend(sub + (w,), ext + new, root, closed | nbrs[w] | {w})

    for v in range(graph.num_nodes):
        start = [u for u in nbrs[v] if u > v]
        yield from extend((v,), start, v, nbrs[v] | {v})


@dataclass(frozen=True)
class MotifCounts:
    counts: Mapping[MotifId, int]

    def __getitem__(self, motif: MotifId | str) -> int:
        return self.counts[MotifId(motif)]

    def as_array(self) -> np.ndarray:
        return np.array([self.counts[m] for m in MOTIFS], dtype=np.int64)

    @classmethod
    def from_array(cls, arr: Sequence[int]) -> MotifCounts:
        return cls({m: int(c) for m, c in zip(MOTIFS, arr)})


def count_motifs(graph: Graph) -> MotifCounts:
    nbrs = graph.neighbors
    tally = dict.fromkeys(MOTIFS, 0)
    for sub in connected_subsets(graph, 4):
        m = 0
        maxdeg = 0
        for a in sub:
            d = sum(1 for b in sub if b in nbrs[a])
            m += d
            maxdeg = max(maxdeg, d)
        tally[_classify(len(sub), m // 2, maxdeg)] += 1
    return MotifCounts(tally)


@dataclass(frozen=True)
class MotifDistribution:
    tar_avg: Mapping[MotifId, float]
    oth_avg: Mapping[MotifId, float]
    absent_in_dataset: frozenset[MotifId] = field(default_factory=frozenset)

    def diff(self, motif: MotifId) -> float:
        return self.tar_avg[motif] - self.oth_avg[motif]

    def rows(self) -> list[dict]:
        return [
            {
                "motif": m.value,
                "tar_avg": self.tar_avg[m],
                "oth_avg": self.oth_avg[m],
                "absent": int(m in self.absent_in_dataset),
            }
            for m in MOTIFS
        ]


def _count_array(graph: Graph) -> np.ndarray:
    return count_motifs(graph).as_array()


def census(graphs: Iterable[Graph], workers: int = 1) -> np.ndarray:
    """Per-graph motif counts as an ``[num_graphs, 8]`` integer matrix."""
    graphs = list(graphs)
    if workers > 1 and len(graphs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_count_array, graphs, chunksize=max(1, len(graphs) // (4 * workers))))
    else:
        rows = [_count_array(g) for g in graphs]
    return np.array(rows, dtype=np.int64).reshape(len(graphs), len(MOTIFS))


def dataset_distribution(
    dataset: Dataset | Sequence[Graph], target_label: int, workers: int = 1, counts: np.ndarray | None = None
) -> MotifDistribution:
    """Mean per-graph motif counts for target-label graphs versus the rest."""
    graphs = list(dataset.graphs if isinstance(dataset, Dataset) else dataset)
    labels = np.array([g.label for g in graphs])
    is_tar = labels == target_label
    if not is_tar.any():
        raise ValueError(f"no graph carries target label {target_label}")
    if counts is None:
        counts = census(graphs, workers)
    tar = counts[is_tar].mean(axis=0)
    oth = counts[~is_tar].mean(axis=0) if (~is_tar).any() else np.zeros(len(MOTIFS))
    totals = counts.sum(axis=0)
    return MotifDistribution(
        {m: float(v) for m, v in zip(MOTIFS, tar)},
        {m: float(v) for m, v in zip(MOTIFS, oth)},
        frozenset(m for m, t in zip(MOTIFS, totals) if t == 0),
    )
