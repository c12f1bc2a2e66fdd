"""Candidate selection and contiguous confidence clusters.

One forward pass yields, for the active block, a greedy token and a
confidence per position plus a block-local attention matrix.  Masked
positions whose confidence clears the threshold become candidates, and
maximal runs of consecutive candidates form the span-level update units
the scheduler works with.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ContractViolation, ValidationError


@dataclass(frozen=True)
class StepObservation:
    """Outputs of one forward pass, restricted to the active block.

    ``greedy[k]`` and ``confidence[k]`` describe absolute position
    ``block_start + k``; ``attention`` is block-local, non-negative and
    not assumed symmetric or normalized.
    """

    block_start: int
    block_len: int
    greedy: tuple[int, ...]
    confidence: tuple[float, ...]
    attention: np.ndarray

    def __post_init__(self) -> None:
        if self.block_len <= 0:
            raise ValidationError("block_len must be positive")
        if len(self.greedy) != self.block_len:
            raise ValidationError(
                f"greedy has {len(self.greedy)} entries, expected {self.block_len}"
            )
        if len(self.confidence) != self.block_len:
            raise ValidationError(
                f"confidence has {len(self.confidence)} entries, expected {self.block_len}"
            )
        for k, c in enumerate(self.confidence):
            if not (0.0 <= c <= 1.0):
                raise ValidationError(f"confidence[{k}] = {c} outside [0, 1]")
        for k, g in enumerate(self.greedy):
            if g < 0:
                raise ValidationError(f"greedy[{k}] = {g} is not a valid token id")
        a = np.asarray(self.attention, dtype=np.float64)
        if a.shape != (self.block_len, self.block_len):
            raise ValidationError(
                f"attention shape {a.shape} != ({self.block_len}, {self.block_len})"
            )
        if not np.all(np.isfinite(a)):
            raise ValidationError("attention contains non-finite entries")
        if np.any(a < 0.0):
            raise ValidationError("attention contains negative entries")
        object.__setattr__(self, "attention", a)

    def confidence_at(self, position: int) -> float:
        """Confidence at an absolute position inside the block."""
        k = position - self.block_start
        if not 0 <= k < self.block_len:
            raise ContractViolation(f"position {position} is outside the block")
        return self.confidence[k]

    def greedy_at(self, position: int) -> int:
        k = position - self.block_start
        if not 0 <= k < self.block_len:
            raise ContractViolation(f"position {position} is outside the block")
        return self.greedy[k]


@dataclass(frozen=True, slots=True)
class Cluster:
    """Inclusive span ``[l, r]`` of consecutive candidate positions."""

    l: int
    r: int

    def __post_init__(self) -> None:
        if self.l > self.r:
            raise ValidationError(f"cluster has l={self.l} > r={self.r}")

    @property
    def weight(self) -> int:
        return self.r - self.l + 1

    def positions(self) -> range:
        return range(self.l, self.r + 1)

    def shifted(self, delta: int) -> Cluster:
        return Cluster(self.l + delta, self.r + delta)


@dataclass(frozen=True, slots=True)
class ClusterSet:
    """Clusters in ascending order, pairwise disjoint and non-adjacent."""

    clusters: tuple[Cluster, ...] = ()

    def __post_init__(self) -> None:
        for a, b in zip(self.clusters, self.clusters[1:]):
            if a.r + 1 >= b.l:
                raise ValidationError(
                    f"clusters [{a.l},{a.r}] and [{b.l},{b.r}] touch or overlap"
                )

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self) -> Iterator[Cluster]:
        return iter(self.clusters)

    def __getitem__(self, k: int) -> Cluster:
        return self.clusters[k]

    def shifted(self, delta: int) -> ClusterSet:
        return ClusterSet(tuple(c.shifted(delta) for c in self.clusters))


def candidate_positions(
    obs: StepObservation, masked: Sequence[int], tau: float
) -> tuple[int, ...]:
    """Masked positions whose confidence clears ``tau``.

    The comparison is an exact, non-strict ``>=``; clean positions are
    never candidates regardless of their reported confidence.
    """
    out = []
    for p in sorted(masked):
        if obs.confidence_at(p) >= tau:
            out.append(p)
    return tuple(out)


def build_clusters(candidates: Sequence[int]) -> ClusterSet:
    """Decompose an ascending candidate set into maximal contiguous runs."""
    cands = list(candidates)
    if cands != sorted(set(cands)):
        raise ContractViolation("candidates must be ascending and duplicate-free")
    clusters: list[Cluster] = []
    run_start: int | None = None
    prev: int | None = None
    for p in cands:
        if run_start is None:
            run_start = p
        elif p != prev + 1:  # type: ignore[operator]
            clusters.append(Cluster(run_start, prev))  # type: ignore[arg-type]
            run_start = p
        prev = p
    if run_start is not None:
        clusters.append(Cluster(run_start, prev))  # type: ignore[arg-type]
    return ClusterSet(tuple(clusters))
