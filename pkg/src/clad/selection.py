"""Exact maximum-weight independent-set selection over a matching.

Cluster weight is its span length.  On a matching the optimum is
immediate: take every isolated cluster and, per conflict edge, the
heavier endpoint.  Inputs that are not matchings are rejected loudly so
an upstream construction bug cannot masquerade as a scheduling choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .clusters import Cluster
from .conflict import ConflictGraph
from .errors import ContractViolation


@dataclass(frozen=True, slots=True)
class Selection:
    """Chosen cluster indices, their total weight, and flat positions."""

    chosen: tuple[int, ...]
    total_weight: int
    update_set: tuple[int, ...]


def update_set(chosen: Sequence[int], clusters: Sequence[Cluster]) -> tuple[int, ...]:
    """Ascending union of the chosen clusters' positions."""
    positions: list[int] = []
    for k in chosen:
        positions.extend(clusters[k].positions())
    return tuple(sorted(positions))


def select_clusters(graph: ConflictGraph) -> Selection:
    """Solve the independent-set problem exactly for a matching.

    Every isolated node is chosen; per edge the endpoint with the larger
    weight wins, ties going to the cluster that starts further left.
    """
    degrees = graph.degrees()
    if any(d > 1 for d in degrees):
        raise ContractViolation(
            "conflict graph is not a matching: a node has degree > 1"
        )
    chosen = [k for k, d in enumerate(degrees) if d == 0]
    for a, b in graph.edges:
        ca, cb = graph.nodes[a], graph.nodes[b]
        if ca.weight > cb.weight:
            chosen.append(a)
        elif cb.weight > ca.weight:
            chosen.append(b)
        else:
            chosen.append(a if ca.l <= cb.l else b)
    chosen.sort()
    total = sum(graph.nodes[k].weight for k in chosen)
    return Selection(
        chosen=tuple(chosen),
        total_weight=total,
        update_set=update_set(chosen, graph.nodes.clusters),
    )
