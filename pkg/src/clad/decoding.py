"""Per-step scheduling and the closed-loop block decoding driver.

Three commitment rules share one driver:

* ``clad`` — cluster-level scheduling: threshold candidates, contiguous
  clusters, attention conflict graph, exact independent-set selection,
  and a top-1 fallback when nothing clears the threshold.
* ``vanilla`` — commit the single most confident masked position.
* ``threshold`` — commit everything above a fixed cutoff, top-1 fallback
  when nothing qualifies.

Cost is counted in forward passes: one oracle query per step.  The
fallback commit reuses the same observation and never costs an extra
pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .clusters import (
    ClusterSet,
    StepObservation,
    build_clusters,
    candidate_positions,
)
from .conflict import build_conflict_graph, symmetrize_attention
from .errors import ConfigError, ContractViolation
from .selection import select_clusters, update_set
from .state import MASK, DecoderConfig, SequenceState, commit, masked_positions


@dataclass(frozen=True)
class DecisionRecord:
    """Audit trail of one scheduling step."""

    step: int
    decoder_kind: str
    masked: tuple[int, ...]
    candidates: tuple[int, ...]
    clusters: ClusterSet
    edges: tuple[tuple[int, int], ...]
    chosen: tuple[int, ...]
    committed: tuple[int, ...]
    fallback_used: bool

    def __post_init__(self) -> None:
        if not set(self.committed) <= set(self.masked):
            raise ContractViolation("committed positions must be masked")
        if self.fallback_used and (len(self.committed) != 1 or self.candidates):
            raise ContractViolation(
                "fallback implies a single committed position and no candidates"
            )
        if self.masked and not self.committed:
            raise ContractViolation("a step over masked positions must commit")


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of a completed decode."""

    final_tokens: tuple[int, ...]
    forward_passes: int
    committed_counts: tuple[int, ...]
    records: tuple[DecisionRecord, ...]
    match_rate: float | None


def _top1(masked: Sequence[int], obs: StepObservation) -> int:
    """Highest-confidence masked position; ties go to the lowest position."""
    best = masked[0]
    best_c = obs.confidence_at(best)
    for p in masked[1:]:
        c = obs.confidence_at(p)
        if c > best_c:
            best, best_c = p, c
    return best


def schedule_clad(
    masked: Sequence[int], obs: StepObservation, tau: float, step: int = 0
) -> DecisionRecord:
    """Cluster-level decision for one observation.

    Pure function of its inputs; shared by the live decoder and trace
    replay so the two can never disagree.
    """
    masked = tuple(masked)
    if not masked:
        return DecisionRecord(
            step=step,
            decoder_kind="clad",
            masked=(),
            candidates=(),
            clusters=ClusterSet(),
            edges=(),
            chosen=(),
            committed=(),
            fallback_used=False,
        )
    candidates = candidate_positions(obs, masked, tau)
    if not candidates:
        j = _top1(masked, obs)
        return DecisionRecord(
            step=step,
            decoder_kind="clad",
            masked=masked,
            candidates=(),
            clusters=ClusterSet(),
            edges=(),
            chosen=(),
            committed=(j,),
            fallback_used=True,
        )
    clusters = build_clusters(candidates)
    r = symmetrize_attention(obs.attention)
    graph = build_conflict_graph(clusters.shifted(-obs.block_start), r)
    selection = select_clusters(graph)
    committed = update_set(selection.chosen, clusters.clusters)
    return DecisionRecord(
        step=step,
        decoder_kind="clad",
        masked=masked,
        candidates=candidates,
        clusters=clusters,
        edges=graph.edges,
        chosen=selection.chosen,
        committed=committed,
        fallback_used=False,
    )


def schedule_vanilla(
    masked: Sequence[int], obs: StepObservation, step: int = 0
) -> DecisionRecord:
    """Original top-1 rule: exactly one commit per pass."""
    masked = tuple(masked)
    if not masked:
        raise ContractViolation("vanilla step requires a masked position")
    j = _top1(masked, obs)
    return DecisionRecord(
        step=step,
        decoder_kind="vanilla",
        masked=masked,
        candidates=(),
        clusters=ClusterSet(),
        edges=(),
        chosen=(),
        committed=(j,),
        fallback_used=False,
    )


def schedule_threshold(
    masked: Sequence[int], obs: StepObservation, threshold: float, step: int = 0
) -> DecisionRecord:
    """Commit all masked positions at or above a fixed confidence cutoff."""
    masked = tuple(masked)
    if not masked:
        raise ContractViolation("threshold step requires a masked position")
    candidates = candidate_positions(obs, masked, threshold)
    if not candidates:
        j = _top1(masked, obs)
        return DecisionRecord(
            step=step,
            decoder_kind="threshold",
            masked=masked,
            candidates=(),
            clusters=ClusterSet(),
            edges=(),
            chosen=(),
            committed=(j,),
            fallback_used=True,
        )
    return DecisionRecord(
        step=step,
        decoder_kind="threshold",
        masked=masked,
        candidates=candidates,
        clusters=ClusterSet(),
        edges=(),
        chosen=(),
        committed=candidates,
        fallback_used=False,
    )


def _check_obs(state: SequenceState, obs: StepObservation) -> None:
    if obs.block_start != state.active_block_start or obs.block_len != state.block_len:
        raise ContractViolation(
            f"observation covers [{obs.block_start}, {obs.block_start + obs.block_len}) "
            f"but the active block is [{state.active_block_start}, "
            f"{state.active_block_start + state.block_len})"
        )


def _apply(state: SequenceState, obs: StepObservation, record: DecisionRecord) -> SequenceState:
    tokens_for = {p: obs.greedy_at(p) for p in record.committed}
    return commit(state, record.committed, tokens_for)


def clad_step(
    state: SequenceState, obs: StepObservation, tau: float, step: int = 0
) -> tuple[SequenceState, DecisionRecord]:
    """One cluster-level decoding step over the active block."""
    masked = masked_positions(state)
    if not masked:
        raise ContractViolation("clad step requires a masked position in the active block")
    _check_obs(state, obs)
    record = schedule_clad(masked, obs, tau, step)
    return _apply(state, obs, record), record


def vanilla_step(
    state: SequenceState, obs: StepObservation, step: int = 0
) -> tuple[SequenceState, DecisionRecord]:
    masked = masked_positions(state)
    if not masked:
        raise ContractViolation("vanilla step requires a masked position in the active block")
    _check_obs(state, obs)
    record = schedule_vanilla(masked, obs, step)
    return _apply(state, obs, record), record


def threshold_step(
    state: SequenceState, obs: StepObservation, threshold: float, step: int = 0
) -> tuple[SequenceState, DecisionRecord]:
    masked = masked_positions(state)
    if not masked:
        raise ContractViolation("threshold step requires a masked position in the active block")
    _check_obs(state, obs)
    record = schedule_threshold(masked, obs, threshold, step)
    return _apply(state, obs, record), record


class Oracle(Protocol):
    """Denoiser stand-in the driver queries once per step."""

    def initial_state(self) -> SequenceState: ...

    def observe(self, state: SequenceState) -> StepObservation: ...

    def reference(self) -> tuple[int, ...] | None:
        """Expected final window when ground truth is known, else None."""
        ...


@dataclass(frozen=True)
class DecodeTrace:
    """Pre-commit window snapshots aligned with the decision records."""

    pre_tokens: tuple[tuple[int, ...], ...]
    observations: tuple[StepObservation, ...]


def decode(
    oracle: Oracle,
    config: DecoderConfig,
    capture: bool = False,
) -> tuple[DecodeResult, DecodeTrace | None]:
    """Closed-loop decode of the full generation region.

    Returns the result plus, when ``capture`` is set, the per-step
    observations and pre-commit snapshots needed to write a trace file.
    """
    state = oracle.initial_state()
    if state.gen_len != config.gen_len or state.block_len != config.block_len:
        raise ConfigError(
            f"oracle produces gen_len={state.gen_len}, block_len={state.block_len}; "
            f"config wants gen_len={config.gen_len}, block_len={config.block_len}"
        )
    if state.finished:
        raise ContractViolation("nothing to decode: the sequence has no masked positions")
    records: list[DecisionRecord] = []
    pre_tokens: list[tuple[int, ...]] = []
    observations: list[StepObservation] = []
    step = 0
    while not state.finished:
        obs = oracle.observe(state)
        if capture:
            pre_tokens.append(state.tokens)
            observations.append(obs)
        if config.decoder_kind == "clad":
            state, record = clad_step(state, obs, config.tau, step)
        elif config.decoder_kind == "vanilla":
            state, record = vanilla_step(state, obs, step)
        else:
            state, record = threshold_step(state, obs, config.threshold, step)
        assert record.committed, "a step must commit at least one token"
        records.append(record)
        step += 1
    assert len(records) <= config.gen_len, "more forward passes than tokens"
    assert all(t != MASK for t in state.tokens), "decode left masked positions"

    match_rate: float | None = None
    ref = oracle.reference()
    if ref is not None:
        gen = range(state.prompt_len, state.prompt_len + state.gen_len)
        hits = sum(1 for p in gen if state.tokens[p] == ref[p])
        match_rate = hits / state.gen_len

    result = DecodeResult(
        final_tokens=state.tokens,
        forward_passes=len(records),
        committed_counts=tuple(len(r.committed) for r in records),
        records=tuple(records),
        match_rate=match_rate,
    )
    trace = (
        DecodeTrace(pre_tokens=tuple(pre_tokens), observations=tuple(observations))
        if capture
        else None
    )
    return result, trace
