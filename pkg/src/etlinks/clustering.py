"""Average-linkage agglomerative clustering under cosine distance."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Merge:
    a: int
    b: int
    height: float
    new_id: int


@dataclass(frozen=True)
class Dendrogram:
    """Leaves are ``0..n-1``; the i-th merge creates cluster ``n + i``."""

    n: int
    merges: tuple[Merge, ...]


@dataclass(frozen=True)
class ClusterProfile:
    members: int
    technologies: int
    companies: int
    total_rnd_meur: float
    label_candidates: tuple[str, ...]


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    labels: tuple[int, ...]
    profiles: tuple[ClusterProfile, ...] = field(default=())

    def members(self, cluster: int) -> list[int]:
        return [i for i, c in enumerate(self.labels) if c == cluster]


def cosine_distances(vectors) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    d = 1.0 - np.clip(x @ x.T, -1.0, 1.0)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def agglomerate(vectors) -> Dendrogram:
    """Average-linkage agglomeration on ``1 - cosine``.

    Equal-distance candidates go to the pair with the smallest
    ``(min id, max id)``. Each active slot caches its nearest partner so a
    merge step costs O(n) apart from the occasional row rescan.
    """
    x = np.asarray(vectors, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise InputError("clustering needs at least two vectors")
    dist = cosine_distances(x)
    np.fill_diagonal(dist, np.inf)
    ids = np.arange(n)                   # cluster id held by each slot
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    nn_dist = np.empty(n)
    nn_slot = np.empty(n, dtype=int)

    def rescan(i):
        row = np.where(active, dist[i], np.inf)
        row[i] = np.inf
        m = row.min()
        cands = np.flatnonzero(row == m)
        j = cands[np.argmin(ids[cands])]
        nn_dist[i], nn_slot[i] = m, j

    for i in range(n):
        rescan(i)

    merges = []
    for step in range(n - 1):
        live = np.flatnonzero(active)
        m = nn_dist[live].min()
        best = None
        for i in live[nn_dist[live] == m]:
            j = nn_slot[i]
            key = (min(ids[i], ids[j]), max(ids[i], ids[j]))
            if best is None or key < best[0]:
                best = (key, i, j)
        (lo, hi), i, j = best
        merges.append(Merge(int(lo), int(hi), float(m), n + step))
        # slot i keeps the merged cluster, slot j retires
        merged = (size[i] * dist[i] + size[j] * dist[j]) / (size[i] + size[j])
        active[j] = False
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        merged[i] = np.inf
        merged[~active] = np.inf
        dist[i, :] = merged
        dist[:, i] = merged
        size[i] += size[j]
        ids[i] = n + step
        if step == n - 2:
            break
        rescan(i)
        rest = np.flatnonzero(active)
        rest = rest[rest != i]
        stale = (nn_slot[rest] == i) | (nn_slot[rest] == j)
        for r in rest[stale]:
            rescan(r)
        rest = rest[~stale]
        closer = rest[dist[rest, i] < nn_dist[rest]]
        nn_dist[closer] = dist[closer, i]
        nn_slot[closer] = i
    return Dendrogram(n, tuple(merges))


def cut(dendrogram: Dendrogram, k: int) -> ClusterAssignment:
    """Undo the last ``k - 1`` merges.

    Cluster indices follow the ascending smallest leaf of each group.
    """
    n = dendrogram.n
    if not 1 <= k <= n:
        raise InputError(f"k={k} out of range 1..{n}")
    parent = list(range(2 * n - 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for m in dendrogram.merges[: n - k]:
        parent[find(m.a)] = m.new_id
        parent[find(m.b)] = m.new_id
    roots = [find(i) for i in range(n)]
    index = {}
    for r in roots:
        index.setdefault(r, len(index))
    return ClusterAssignment(k, tuple(index[r] for r in roots))


def profile_clusters(
    assignment: ClusterAssignment,
    entities: Sequence,
    vectors,
    n_labels: int = 3,
) -> ClusterAssignment:
    """Fill per-cluster counts, total spend and centroid-nearest names.

    ``entities`` are Company/Technology objects aligned with the leaves.
    """
    x = np.asarray(vectors, dtype=np.float64)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    profiles = []
    for c in range(assignment.k):
        idx = assignment.members(c)
        members = [entities[i] for i in idx]
        techs = sum(1 for e in members if e.kind == "technology")
        spend = float(sum(getattr(e, "rnd_meur", 0.0) for e in members))
        centroid = x[idx].mean(axis=0)
        dist = -(x[idx] @ centroid)
        order = sorted(range(len(idx)), key=lambda a: (dist[a], members[a].id))
        labels = tuple(members[a].name for a in order[:n_labels])
        profiles.append(ClusterProfile(len(idx), techs, len(idx) - techs, spend, labels))
    return ClusterAssignment(assignment.k, assignment.labels, tuple(profiles))


def export_dendrogram_csv(dendrogram: Dendrogram) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster_a", "cluster_b", "height", "new_id"])
    for m in dendrogram.merges:
        w.writerow([m.a, m.b, f"{m.height:.9g}", m.new_id])
    return buf.getvalue().encode("utf-8")


def export_assignment_csv(entities: Sequence, assignment: ClusterAssignment) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entity_id", "kind", "cluster"])
    for e, c in zip(entities, assignment.labels):
        w.writerow([e.id, e.kind, c])
    return buf.getvalue().encode("utf-8")
