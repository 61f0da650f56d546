"""Benchmark selection as dominating sets and maximal independent sets."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from selector.datamodel import InstanceKey
from selector.errors import DomainError
from selector.rng import make_rng
from selector.similarity import SimilarityGraph

HEURISTICS = ("DS", "MIS")


@dataclass(frozen=True)
class SelectionRun:
    heuristic: str
    threshold: float
    seed: int
    indices: tuple[int, ...]
    selected: tuple[InstanceKey, ...]

    @property
    def size(self) -> int:
        return len(self.selected)

    def to_json(self) -> dict:
        return {
            "heuristic": self.heuristic,
            "threshold": self.threshold,
            "seed": self.seed,
            "instances": [str(k) for k in self.selected],
        }


def verify_dominating(graph: SimilarityGraph, selected) -> bool:
    chosen = set(selected)
    return all(v in chosen or graph.adjacency[v] & chosen for v in range(graph.n))


def verify_independent(graph: SimilarityGraph, selected) -> bool:
    chosen = set(selected)
    return not any(graph.adjacency[v] & chosen for v in chosen)


def verify_independent_maximal(graph: SimilarityGraph, selected) -> bool:
    chosen = set(selected)
    if not verify_independent(graph, chosen):
        return False
    # maximal: every outside node already has a selected neighbour
    return all(graph.adjacency[v] & chosen for v in range(graph.n) if v not in chosen)


def _run(graph, heuristic, seed, indices):
    indices = tuple(sorted(indices))
    return SelectionRun(
        heuristic, graph.threshold, seed, indices, tuple(graph.nodes[i] for i in indices)
    )


def dominating_set(graph: SimilarityGraph, seed: int) -> SelectionRun:
    """Greedy max-coverage over closed neighbourhoods, random tie-breaking."""
    if graph.n == 0:
        raise DomainError("graph has no nodes")
    rng = make_rng(seed)
    closed = graph.adjacency_matrix()
    np.fill_diagonal(closed, True)
    closed = closed.astype(np.int64)
    undominated = np.ones(graph.n, dtype=np.int64)
    chosen = []
    while undominated.any():
        gain = closed @ undominated
        best = np.flatnonzero(gain == gain.max())
        v = int(best[rng.integers(len(best))])
        chosen.append(v)
        undominated[closed[v] == 1] = 0
    if not verify_dominating(graph, chosen):
        raise AssertionError("greedy dominating set failed verification")
    return _run(graph, "DS", seed, chosen)


def maximal_independent_set(graph: SimilarityGraph, seed: int) -> SelectionRun:
    """Visit nodes in a seeded random order, keeping each with no kept neighbour."""
    if graph.n == 0:
        raise DomainError("graph has no nodes")
    rng = make_rng(seed)
    chosen: set[int] = set()
    for v in rng.permutation(graph.n).tolist():
        if not graph.adjacency[v] & chosen:
            chosen.add(v)
    if not verify_independent_maximal(graph, chosen):
        raise AssertionError("greedy MIS failed verification")
    return _run(graph, "MIS", seed, chosen)


_SELECTORS = {"DS": dominating_set, "MIS": maximal_independent_set}


@dataclass(frozen=True)
class BatchResult:
    runs: tuple[SelectionRun, ...]
    minimum: int
    maximum: int
    mean: float

    def summary(self) -> dict:
        return {
            "heuristic": self.runs[0].heuristic,
            "threshold": self.runs[0].threshold,
            "seeds": [r.seed for r in self.runs],
            "sizes": [r.size for r in self.runs],
            "min": self.minimum,
            "max": self.maximum,
            "mean": self.mean,
        }


def run_batch(graph: SimilarityGraph, heuristic: str, seeds) -> BatchResult:
    heuristic = heuristic.upper()
    if heuristic not in _SELECTORS:
        raise DomainError(f"unknown heuristic {heuristic!r}; choose from {HEURISTICS}")
    seeds = list(seeds)
    if not seeds:
        raise DomainError("need at least one seed")
    runs = tuple(_SELECTORS[heuristic](graph, s) for s in seeds)
    sizes = [r.size for r in runs]
    return BatchResult(runs, min(sizes), max(sizes), float(np.mean(sizes)))


def export_batch(batch: BatchResult, directory, config: dict | None = None) -> list[Path]:
    """One JSON file per run plus ``summary.json``; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for i, run in enumerate(batch.runs):
        doc = run.to_json()
        if config is not None:
            doc["config"] = config
        p = directory / f"run_{i:03d}.json"
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(p)
    summary = batch.summary()
    if config is not None:
        summary["config"] = config
    p = directory / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(p)
    return written
