"""Agglomerative clustering over a precomputed distance matrix.

Leaves get ids 0..n-1 and the merge at step s creates cluster id n+s, so a
dendrogram is just the ordered list of merges. Inter-cluster distances are
maintained incrementally (Lance-Williams updates); when several pairs tie
at the minimum distance the pair with the lexicographically smallest
(id, id) wins, which makes the whole procedure deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from screenquest.checks import check_distance_matrix

LINKAGES = ("average", "complete", "single")


@dataclass
class Dendrogram:
    """Merge s joins cluster ids merges[s][0] and merges[s][1] at distance
    merges[s][2], creating cluster id n_leaves + s."""

    n_leaves: int
    linkage: str
    merges: list[tuple[int, int, float]]

    def new_id(self, step: int) -> int:
        return self.n_leaves + step


def agglomerate(distances, linkage: str = "average") -> Dendrogram:
    """Merge the two closest clusters until one remains.

    ``distances`` is a square symmetric matrix with a zero diagonal.
    Raises on an empty matrix or an unknown linkage.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    D = check_distance_matrix(distances)
    n = D.shape[0]
    if n == 0:
        raise ValueError("cannot cluster an empty distance matrix")

    # current inter-cluster distances, keyed by (smaller id, larger id)
    dist: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = float(D[i, j])
    sizes = {i: 1 for i in range(n)}
    active = set(range(n))
    merges: list[tuple[int, int, float]] = []

    for step in range(n - 1):
        best_pair = min(dist, key=lambda p: (dist[p], p))
        d_best = dist[best_pair]
        a, b = best_pair
        new = n + step
        merges.append((a, b, d_best))

        size_a, size_b = sizes[a], sizes[b]
        active.discard(a)
        active.discard(b)
        for c in active:
            d_ac = dist.pop(_key(a, c))
            d_bc = dist.pop(_key(b, c))
            if linkage == "average":
                d_new = (size_a * d_ac + size_b * d_bc) / (size_a + size_b)
            elif linkage == "complete":
                d_new = max(d_ac, d_bc)
            else:
                d_new = min(d_ac, d_bc)
            dist[(c, new)] = d_new
        del dist[best_pair]
        sizes[new] = size_a + size_b
        active.add(new)

    return Dendrogram(n_leaves=n, linkage=linkage, merges=merges)


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass
class Partition:
    """A flat clustering: cluster ids are 0..k-1, ordered by each cluster's
    smallest member index, and members lists are sorted."""

    k: int
    labels: list[int]
    members: list[list[int]]

    def max_cluster_size(self) -> int:
        return max(len(m) for m in self.members)


def cut(dendrogram: Dendrogram, k: int) -> Partition:
    """Stop the merge sequence early to get exactly k clusters."""
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        while x in parent:
            x = parent[x]
        return x

    for step in range(n - k):
        a, b, _d = dendrogram.merges[step]
        new = dendrogram.new_id(step)
        parent[find(a)] = new
        parent[find(b)] = new

    groups: dict[int, list[int]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(leaf)
    members = sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])
    labels = [0] * n
    for cid, group in enumerate(members):
        for leaf in group:
            labels[leaf] = cid
    return Partition(k=k, labels=labels, members=members)


def max_cluster_size(partition: Partition) -> int:
    return partition.max_cluster_size()


class PairwiseAgglomerative(BaseEstimator, ClusterMixin):
    """Estimator wrapper: fit on a square distance matrix, get labels_.

    Parameters
    ----------
    n_clusters : number of flat clusters to cut the dendrogram at.
    linkage : 'average', 'complete' or 'single'.
    """

    def __init__(self, n_clusters: int = 2, linkage: str = "average"):
        self.n_clusters = n_clusters
        self.linkage = linkage

    def fit(self, X, y=None):
        self.dendrogram_ = agglomerate(X, self.linkage)
        partition = cut(self.dendrogram_, self.n_clusters)
        self.partition_ = partition
        self.labels_ = np.asarray(partition.labels)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X, y).labels_


def cluster_label(member_names: list[str], width: int = 3) -> str:
    """Short display label: the few shortest member names joined by '/'."""
    chosen = sorted(member_names, key=lambda s: (len(s), s))[:width]
    return "/".join(chosen)


def write_partition(
    partition: Partition, names: list[str], path, header_comment: str | None = None
) -> None:
    """TSV with columns symptom, cluster_id, cluster_label."""
    labels = {
        cid: cluster_label([names[i] for i in group])
        for cid, group in enumerate(partition.members)
    }
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header_comment:
            handle.write(f"# {header_comment}\n")
        handle.write("symptom\tcluster_id\tcluster_label\n")
        for idx, name in enumerate(names):
            cid = partition.labels[idx]
            handle.write(f"{name}\t{cid}\t{labels[cid]}\n")
