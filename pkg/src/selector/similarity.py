"""Cosine similarity between feature rows and the thresholded similarity graph."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from selector.datamodel import FeatureTable, InstanceKey, format_float
from selector.errors import DomainError


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DomainError(f"length mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DomainError("cosine similarity undefined for a zero vector")
    if np.array_equal(a / na, b / nb):
        return 1.0
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


def minmax_rescale(values: np.ndarray) -> np.ndarray:
    """Per-column rescale to [0, 1]; constant columns map to 0."""
    lo = values.min(axis=0)
    span = values.max(axis=0) - lo
    return (values - lo) / np.where(span > 0, span, 1.0)


def unit_rows(table: FeatureTable, rescale: bool = False) -> np.ndarray:
    values = minmax_rescale(table.values) if rescale else table.values
    norms = np.linalg.norm(values, axis=1)
    if np.any(norms == 0):
        bad = table.keys[int(np.flatnonzero(norms == 0)[0])]
        raise DomainError(f"instance {bad} has an all-zero feature vector")
    return values / norms[:, None]


def similarity_matrix(table: FeatureTable, rescale: bool = False) -> np.ndarray:
    u = unit_rows(table, rescale)
    s = np.clip(u @ u.T, -1.0, 1.0)
    # symmetrise exactly; the matrix product is not guaranteed to be
    s = np.triu(s, 1)
    s = s + s.T
    np.fill_diagonal(s, 1.0)
    return s


@dataclass(frozen=True)
class SimilarityGraph:
    nodes: tuple[InstanceKey, ...]
    edges: frozenset[tuple[int, int]]
    threshold: float
    similarities: dict = field(default_factory=dict, compare=False, repr=False)
    adjacency: tuple[frozenset[int], ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        n = len(self.nodes)
        adj = [set() for _ in range(n)]
        clean = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError("self-loops are not allowed")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range")
            u, v = min(u, v), max(u, v)
            clean.add((u, v))
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "edges", frozenset(clean))
        object.__setattr__(self, "adjacency", tuple(frozenset(a) for a in adj))

    @property
    def n(self) -> int:
        return len(self.nodes)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.edges:
            a[u, v] = a[v, u] = True
        return a

    @classmethod
    def from_edges(cls, n: int, edges, threshold: float = 0.0, labels=None):
        """Graph on synthetic keys ``G_1_1 .. G_n_1``; handy for tests."""
        nodes = labels or [InstanceKey("G", i + 1, 1, 1) for i in range(n)]
        return cls(tuple(nodes), frozenset(edges), threshold)


def build_graph(table: FeatureTable, threshold: float, rescale: bool = False) -> SimilarityGraph:
    """Edge (u, v) whenever cos(row_u, row_v) >= threshold."""
    if len(table) < 1:
        raise DomainError("cannot build a graph from an empty table")
    if not np.isfinite(threshold):
        raise DomainError(f"threshold must be finite, got {threshold}")
    s = similarity_matrix(table, rescale)
    # pairs within rounding distance of the threshold are decided by the scalar
    # definition, so membership agrees with cosine_similarity exactly
    values = minmax_rescale(table.values) if rescale else table.values
    for i, j in zip(*np.nonzero(np.triu(np.abs(s - threshold) <= 1e-9, 1))):
        s[i, j] = s[j, i] = cosine_similarity(values[i], values[j])
    iu, ju = np.nonzero(np.triu(s >= threshold, 1))
    edges = frozenset(zip(iu.tolist(), ju.tolist()))
    sims = {(i, j): float(s[i, j]) for i, j in edges}
    return SimilarityGraph(table.keys, edges, float(threshold), sims)


@dataclass(frozen=True)
class DegreeStatistics:
    degrees: tuple[int, ...]
    minimum: int
    maximum: int
    mean: float
    ecdf: tuple[tuple[int, float], ...]  # (degree value, fraction of nodes <= value)

    def fraction_between(self, low: int, high: int) -> float:
        """Fraction of nodes with ``low < degree < high``."""
        d = np.asarray(self.degrees)
        return float(np.mean((d > low) & (d < high))) if len(d) else 0.0


def degree_statistics(graph: SimilarityGraph) -> DegreeStatistics:
    deg = np.array([graph.degree(i) for i in range(graph.n)], dtype=int)
    if len(deg) == 0:
        return DegreeStatistics((), 0, 0, 0.0, ())
    values, counts = np.unique(deg, return_counts=True)
    cum = np.cumsum(counts) / len(deg)
    return DegreeStatistics(
        tuple(deg.tolist()),
        int(deg.min()),
        int(deg.max()),
        float(deg.mean()),
        tuple((int(v), float(c)) for v, c in zip(values, cum)),
    )


def connected_components(graph: SimilarityGraph) -> list[frozenset[int]]:
    """Node-index sets ordered by size (descending), then smallest member."""
    seen = [False] * graph.n
    comps = []
    for s in range(graph.n):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [s], deque([s])
        while queue:
            u = queue.popleft()
            for v in graph.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        comps.append(frozenset(comp))
    comps.sort(key=lambda c: (-len(c), min(c)))
    return comps


def export_graph(graph: SimilarityGraph, path, config: dict | None = None) -> None:
    """Edge list ``u_key v_key similarity`` preceded by a one-line JSON header."""
    header = {
        "threshold": graph.threshold,
        "nodes": [str(k) for k in graph.nodes],
        "edge_count": len(graph.edges),
    }
    if config is not None:
        header["config"] = config
    lines = [json.dumps(header, sort_keys=True)]
    for u, v in sorted(graph.edges):
        sim = graph.similarities.get((u, v))
        lines.append(
            f"{graph.nodes[u]} {graph.nodes[v]} {format_float(sim) if sim is not None else 'nan'}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_degrees(graph: SimilarityGraph, path) -> None:
    stats = degree_statistics(graph)
    rows = ["instance,degree"] + [f"{k},{d}" for k, d in zip(graph.nodes, stats.degrees)]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")
