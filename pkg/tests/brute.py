"""Independent brute-force evaluators used as test oracles.

Everything here is deliberately written with plain Python loops over
plain lists, so it shares no code path with the package's vectorized
implementations.
"""

from __future__ import annotations

from itertools import combinations


def brute_pair_score(r, ca_positions, cb_positions) -> float:
    """Enumerate every (i, j) entry of the pair-score definition."""
    ca = list(ca_positions)
    cb = list(cb_positions)
    into_b = max(sum(r[i][j] for j in cb) / len(cb) for i in ca)
    into_a = max(sum(r[j][i] for i in ca) / len(ca) for j in cb)
    return max(into_b, into_a)


def brute_edges(s) -> set[tuple[int, int]]:
    """Mutual-strongest edges, direct transcription of the rule."""
    k = len(s)
    if k < 2:
        return set()

    def strongest(a: int) -> int:
        return min(
            (b for b in range(k) if b != a), key=lambda b: (-s[a][b], b)
        )

    s_bar = [sum(s[a][b] for b in range(k) if b != a) / (k - 1) for a in range(k)]
    edges = set()
    for a, b in combinations(range(k), 2):
        if (
            strongest(a) == b
            and strongest(b) == a
            and s[a][b] >= s_bar[a]
            and s[a][b] >= s_bar[b]
        ):
            edges.add((a, b))
    return edges


def brute_mwis_weight(weights, edges) -> int:
    """Maximum independent-set weight by enumerating all subsets."""
    k = len(weights)
    best = 0
    for mask in range(1 << k):
        if any((mask >> a) & 1 and (mask >> b) & 1 for a, b in edges):
            continue
        total = sum(w for i, w in enumerate(weights) if (mask >> i) & 1)
        best = max(best, total)
    return best
