"""Clustering-based benchmark selection.

Agglomerative clustering under cosine distance, silhouette-driven choice of
the number of clusters, re-clustering of the dominant cluster, and
representative selection (nearest to centroid, or uniform draws from the
members closest to it).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from selector.datamodel import KEY_COLUMNS, FeatureTable, InstanceKey
from selector.errors import ConstraintError, DomainError
from selector.rng import make_rng
from selector.similarity import similarity_matrix

LINKAGES = ("average", "complete", "single")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Full merge history over ``n`` rows; clusters are named by their smallest row."""

    n: int
    merges: tuple[Merge, ...]

    def cut(self, k: int) -> np.ndarray:
        """Labels 0..k-1 after replaying the first ``n - k`` merges.

        Cluster ids follow the smallest row index each cluster contains.
        """
        if not 1 <= k <= self.n:
            raise DomainError(f"k={k} outside [1, {self.n}]")
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for m in self.merges[: self.n - k]:
            a, b = find(m.left), find(m.right)
            parent[max(a, b)] = min(a, b)
        roots = [find(i) for i in range(self.n)]
        ids = {r: i for i, r in enumerate(sorted(set(roots)))}
        return np.array([ids[r] for r in roots], dtype=int)


def cosine_distances(table: FeatureTable) -> np.ndarray:
    d = 1.0 - similarity_matrix(table)
    np.fill_diagonal(d, 0.0)
    return np.clip(d, 0.0, 2.0)


def linkage(table: FeatureTable, method: str = "average") -> Dendrogram:
    """Bottom-up merging; ties on the minimum go to the smallest (i, j) pair."""
    if method not in LINKAGES:
        raise DomainError(f"unknown linkage {method!r}; choose from {LINKAGES}")
    n = len(table)
    if n == 0:
        raise DomainError("cannot cluster an empty table")
    dist = cosine_distances(table)
    work = dist.copy()
    work[np.tril_indices(n)] = np.inf
    sizes = np.ones(n, dtype=int)
    merges = []
    for _ in range(n - 1):
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        d_ij = float(work[i, j])
        ni, nj = sizes[i], sizes[j]
        # Lance-Williams update on the full symmetric matrix
        if method == "average":
            new = (ni * dist[i] + nj * dist[j]) / (ni + nj)
        elif method == "complete":
            new = np.maximum(dist[i], dist[j])
        else:
            new = np.minimum(dist[i], dist[j])
        dist[i, :] = new
        dist[:, i] = new
        dist[i, i] = 0.0
        sizes[i] = ni + nj
        sizes[j] = 0
        merges.append(Merge(i, j, d_ij, int(ni + nj)))
        work[i, i + 1:] = new[i + 1:]
        work[:i, i] = new[:i]
        work[j, :] = np.inf
        work[:, j] = np.inf
        work[:i, i][sizes[:i] == 0] = np.inf
        work[i, i + 1:][sizes[i + 1:] == 0] = np.inf
    return Dendrogram(n, tuple(merges))


@dataclass(frozen=True)
class ClusterModel:
    keys: tuple[InstanceKey, ...]
    labels: np.ndarray
    centroids: dict  # cluster id -> feature vector
    linkage_trace: tuple[Merge, ...]
    centroid_method: str = "mean"

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int).copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "keys", tuple(self.keys))
        k = int(labels.max()) + 1 if len(labels) else 0
        if sorted(set(labels.tolist())) != list(range(k)):
            raise ValueError("cluster ids must be contiguous 0..k-1 with no empty cluster")

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def assignments(self) -> dict[InstanceKey, int]:
        return dict(zip(self.keys, self.labels.tolist()))

    def members(self, cid: int) -> list[int]:
        return np.flatnonzero(self.labels == cid).tolist()

    def sizes(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.k).tolist()


def _centroids(values: np.ndarray, labels: np.ndarray, method: str) -> dict:
    if method not in ("mean", "median"):
        raise DomainError(f"unknown centroid method {method!r}")
    agg = np.mean if method == "mean" else np.median
    k = int(labels.max()) + 1
    return {c: agg(values[labels == c], axis=0) for c in range(k)}


def model_from_labels(table, labels, trace=(), centroid_method="mean") -> ClusterModel:
    labels = np.asarray(labels, dtype=int)
    return ClusterModel(
        table.keys, labels, _centroids(table.values, labels, centroid_method),
        tuple(trace), centroid_method,
    )


def agglomerative_cluster(
    table: FeatureTable, k: int, method: str = "average", centroid_method: str = "mean"
) -> ClusterModel:
    if k < 1 or k > len(table):
        raise DomainError(f"k={k} must lie in [1, {len(table)}]")
    dendro = linkage(table, method)
    return model_from_labels(table, dendro.cut(k), dendro.merges, centroid_method)


def silhouette_from_distances(dist: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    k = int(labels.max()) + 1
    if k < 2:
        raise DomainError("silhouette needs at least 2 clusters")
    n = len(labels)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sizes = onehot.sum(axis=0)
    sums = dist @ onehot  # row i: total distance to each cluster
    own = sizes[labels]
    a = np.where(own > 1, sums[np.arange(n), labels] / np.maximum(own - 1, 1), 0.0)
    mean_to = sums / sizes
    mean_to[np.arange(n), labels] = np.inf
    b = mean_to.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def silhouette_score(table: FeatureTable, model: ClusterModel) -> float:
    """Mean silhouette under cosine distance; singleton members count as 0."""
    return silhouette_from_distances(cosine_distances(table), model.labels)


def silhouette_sweep(table: FeatureTable, ks, method: str = "average") -> dict[int, float]:
    dendro = linkage(table, method)
    dist = cosine_distances(table)
    return {k: silhouette_from_distances(dist, dendro.cut(k)) for k in ks}


def choose_k(table: FeatureTable, k_range: tuple[int, int], min_total: int = 0,
             method: str = "average") -> int:
    """Silhouette-best k among k_range with k >= min_total; ties go to the smaller k."""
    lo, hi = k_range
    n = len(table)
    if lo > hi or lo < 2 or hi > n:
        raise DomainError(f"k range [{lo}, {hi}] must be non-empty within [2, {n}]")
    feasible = [k for k in range(lo, hi + 1) if k >= min_total]
    if not feasible:
        raise ConstraintError(
            f"no k in [{lo}, {hi}] gives at least {min_total} selected instances"
        )
    scores = silhouette_sweep(table, feasible, method)
    best = max(scores.values())
    return min(k for k, s in scores.items() if s == best)


def split_largest(
    table: FeatureTable, model: ClusterModel, sub_k: int, method: str = "average"
) -> ClusterModel:
    """Re-cluster the largest cluster into ``sub_k`` parts.

    Remaining clusters keep their relative order; the sub-clusters are appended.
    """
    sizes = model.sizes()
    largest = int(np.argmax(sizes))
    members = model.members(largest)
    if sub_k < 1 or sub_k > len(members):
        raise DomainError(f"sub_k={sub_k} must lie in [1, {len(members)}]")
    sub_table = table.subset([table.keys[i] for i in members])
    dendro = linkage(sub_table, method)
    sub_labels = dendro.cut(sub_k)
    remap = {}
    for c in range(model.k):
        if c != largest:
            remap[c] = len(remap)
    offset = len(remap)
    labels = np.array([remap.get(c, -1) for c in model.labels.tolist()])
    labels[members] = offset + sub_labels
    sub_trace = tuple(
        Merge(members[m.left], members[m.right], m.distance, m.size) for m in dendro.merges
    )
    return model_from_labels(
        table, labels, model.linkage_trace + sub_trace, model.centroid_method
    )


def _member_similarities(table: FeatureTable, model: ClusterModel, cid: int):
    rows = np.array(model.members(cid))
    centroid = model.centroids[cid]
    cn = np.linalg.norm(centroid)
    if cn == 0:
        raise DomainError(f"cluster {cid} has a zero centroid")
    vals = table.values[rows]
    norms = np.linalg.norm(vals, axis=1)
    if np.any(norms == 0):
        raise DomainError(f"cluster {cid} contains an all-zero feature vector")
    sims = np.clip(vals @ centroid / (norms * cn), -1.0, 1.0)
    return rows, sims


def _check_consistent(table: FeatureTable, model: ClusterModel):
    if table.keys != model.keys:
        raise DomainError("cluster model was built on a different table")


def centroid_representatives(table: FeatureTable, model: ClusterModel) -> list[InstanceKey]:
    """Per cluster, the member most cosine-similar to its centroid (lowest row on ties)."""
    _check_consistent(table, model)
    reps = []
    for cid in range(model.k):
        rows, sims = _member_similarities(table, model, cid)
        reps.append(table.keys[int(rows[int(np.argmax(sims))])])
    return reps


def representative_pools(
    table: FeatureTable, model: ClusterModel, fraction: float
) -> dict[int, list[InstanceKey]]:
    """Per cluster, the ceil(fraction * size) members closest to the centroid."""
    if not 0 < fraction <= 1:
        raise DomainError(f"fraction must lie in (0, 1], got {fraction}")
    _check_consistent(table, model)
    pools = {}
    for cid in range(model.k):
        rows, sims = _member_similarities(table, model, cid)
        order = np.lexsort((rows, -sims))
        m = max(1, math.ceil(fraction * len(rows) - 1e-9))
        pools[cid] = [table.keys[int(rows[i])] for i in order[:m]]
    return pools


def sample_suite(pools: dict[int, list[InstanceKey]], repetitions: int, seed: int):
    """One uniformly drawn member per cluster pool, for each repetition."""
    if repetitions < 1:
        raise DomainError("repetitions must be >= 1")
    suites = []
    for r in range(repetitions):
        rng = make_rng(seed, r)
        suites.append([pools[c][int(rng.integers(len(pools[c])))] for c in sorted(pools)])
    return suites


def export_assignments(model: ClusterModel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(KEY_COLUMNS) + ["cluster_id"])
        for key, c in zip(model.keys, model.labels.tolist()):
            w.writerow(key.as_row() + [c])


def export_suites(suites, path, params: dict) -> None:
    doc = {"parameters": params, "suites": [[str(k) for k in s] for s in suites]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
