"""Sparse inter-cluster conflict graph derived from attention.

Directed attention is symmetrized entrywise by max.  A pair of clusters
gets a dependency score: the strongest per-token mean attention into the
other cluster, taken over both directions.  An edge survives only when
the two clusters are mutually each other's strongest dependency and the
score is at least both clusters' mean dependency level.  Because each
node has a single strongest partner, surviving edges form a matching.

Cluster coordinates here index directly into the supplied matrix; the
caller shifts absolute spans into block-local coordinates first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clusters import Cluster, ClusterSet
from .errors import ContractViolation, ValidationError


def symmetrize_attention(a: np.ndarray) -> np.ndarray:
    """Entrywise ``max(a, a.T)`` with a zeroed diagonal."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"attention must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("attention contains non-finite entries")
    if np.any(a < 0.0):
        raise ValidationError("attention contains negative entries")
    r = np.maximum(a, a.T)
    np.fill_diagonal(r, 0.0)
    return r


def cluster_pair_score(r: np.ndarray, ca: Cluster, cb: Cluster) -> float:
    """Strongest cross-cluster dependency between ``ca`` and ``cb``.

    For each token of one cluster, attention into the other cluster is
    averaged (so long clusters are not favored); the pair score is the
    maximum such value over both clusters' tokens.  Symmetric in its
    cluster arguments.
    """
    n = r.shape[0]
    if ca.l < 0 or cb.l < 0 or ca.r >= n or cb.r >= n:
        raise ContractViolation("cluster outside the matrix index range")
    if ca.l <= cb.r and cb.l <= ca.r:
        raise ContractViolation(
            f"clusters [{ca.l},{ca.r}] and [{cb.l},{cb.r}] overlap"
        )
    sub = r[ca.l : ca.r + 1, cb.l : cb.r + 1]
    from_a = float(sub.mean(axis=1).max())
    from_b = float(sub.mean(axis=0).max())
    return max(from_a, from_b)


@dataclass(frozen=True, slots=True)
class ScoreTable:
    """All pairwise cluster scores plus per-cluster means.

    ``s`` is symmetric with an undefined (zero-filled) diagonal;
    ``s_bar[a]`` is the mean of ``s[a, b]`` over ``b != a``.  Only
    materialized for two or more clusters.
    """

    k: int
    s: np.ndarray
    s_bar: np.ndarray


def score_table(clusters: ClusterSet, r: np.ndarray) -> ScoreTable:
    k = len(clusters)
    if k < 2:
        raise ContractViolation("score table requires at least two clusters")
    s = np.zeros((k, k), dtype=np.float64)
    for a in range(k):
        for b in range(a + 1, k):
            s[a, b] = s[b, a] = cluster_pair_score(r, clusters[a], clusters[b])
    s_bar = s.sum(axis=1) / (k - 1)
    return ScoreTable(k=k, s=s, s_bar=s_bar)


@dataclass(frozen=True, slots=True)
class ConflictGraph:
    """Clusters plus mutual-strongest conflict edges.

    Built graphs are matchings: every node carries at most one edge.
    ``skipped`` marks the single-cluster case where pairwise scoring is
    bypassed entirely and ``scores`` stays unmaterialized.
    """

    nodes: ClusterSet
    edges: tuple[tuple[int, int], ...] = ()
    scores: ScoreTable | None = None
    skipped: bool = False

    def __post_init__(self) -> None:
        n = len(self.nodes)
        for a, b in self.edges:
            if a == b:
                raise ValidationError(f"self-loop on node {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValidationError(f"edge ({a}, {b}) has an invalid endpoint")

    def degrees(self) -> list[int]:
        deg = [0] * len(self.nodes)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg


def build_conflict_graph(clusters: ClusterSet, r: np.ndarray) -> ConflictGraph:
    """Retain only reciprocal salient dependencies between clusters.

    An edge ``(a, b)`` survives when ``b`` is ``a``'s strongest external
    dependency and vice versa, and the pair score is at least both
    per-cluster means.  Argmax ties break toward the lowest cluster
    index.  With a single cluster the pairwise stage is skipped.
    """
    k = len(clusters)
    if k == 0:
        return ConflictGraph(nodes=clusters)
    if k == 1:
        return ConflictGraph(nodes=clusters, skipped=True)
    table = score_table(clusters, r)
    s = table.s
    # Strongest partner per cluster; the diagonal is excluded by -inf.
    masked = s.copy()
    np.fill_diagonal(masked, -np.inf)
    strongest = masked.argmax(axis=1)  # argmax keeps the lowest index on ties
    edges: list[tuple[int, int]] = []
    for a in range(k):
        b = int(strongest[a])
        if b <= a:
            continue  # handled from the other side, or not mutual
        if int(strongest[b]) != a:
            continue
        if s[a, b] >= table.s_bar[a] and s[a, b] >= table.s_bar[b]:
            edges.append((a, b))
    return ConflictGraph(nodes=clusters, edges=tuple(edges), scores=table)
