"""Step-record trace files and single-step replay verification.

A trace is line-delimited JSON: one header object, then one object per
decoding step carrying the full pre-commit window, the block-local
observation and (optionally) the committed positions.  Numbers are
serialized with shortest round-trip precision, so read(write(x)) is
bit-exact and files diff cleanly.

The same decision code that drives live decoding re-runs here against
recorded observations, which is what makes replay a meaningful check:
a recorded ``committed`` set either reproduces exactly or it does not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Union

import numpy as np

from .clusters import StepObservation
from .decoding import DecisionRecord, schedule_clad
from .errors import ContractViolation, TraceParseError, ValidationError
from .state import MASK, SequenceState

TRACE_FORMAT = "clad-step-record"
TRACE_VERSION = 1


@dataclass(frozen=True, slots=True)
class TraceHeader:
    seq_len: int
    prompt_len: int
    block_len: int
    layers_averaged: int = 0
    heads_averaged: int = 0
    attention_scope: str = "block"

    def __post_init__(self) -> None:
        if self.seq_len <= 0 or self.block_len <= 0:
            raise ValidationError("seq_len and block_len must be positive")
        if not 0 <= self.prompt_len < self.seq_len:
            raise ValidationError("prompt_len out of range")
        gen_len = self.seq_len - self.prompt_len
        if gen_len % self.block_len != 0:
            raise ValidationError(
                f"generation region {gen_len} is not a multiple of block_len "
                f"{self.block_len}"
            )
        if self.attention_scope != "block":
            raise ValidationError(
                f"unsupported attention_scope {self.attention_scope!r}"
            )


@dataclass(frozen=True)
class StepRecord:
    """One decoding step: pre-commit window plus the block observation."""

    step: int
    block_start: int
    tokens: tuple[int, ...]
    greedy: tuple[int, ...]
    confidence: tuple[float, ...]
    attention: np.ndarray
    committed: tuple[int, ...] | None = None

    def block_len(self) -> int:
        return len(self.greedy)

    def masked(self) -> tuple[int, ...]:
        lo = self.block_start
        hi = lo + self.block_len()
        return tuple(p for p in range(lo, hi) if self.tokens[p] == MASK)

    def observation(self) -> StepObservation:
        return StepObservation(
            block_start=self.block_start,
            block_len=self.block_len(),
            greedy=self.greedy,
            confidence=self.confidence,
            attention=self.attention,
        )


@dataclass(frozen=True)
class StepRecordFile:
    header: TraceHeader
    records: tuple[StepRecord, ...]


def _validate_record(header: TraceHeader, rec: StepRecord, line: int | None) -> None:
    b = header.block_len
    if len(rec.tokens) != header.seq_len:
        raise TraceParseError(
            f"tokens has {len(rec.tokens)} entries, expected {header.seq_len}", line
        )
    if len(rec.greedy) != b or len(rec.confidence) != b:
        raise TraceParseError("greedy/confidence length != block_len", line)
    if rec.attention.shape != (b, b):
        raise TraceParseError(
            f"attention shape {rec.attention.shape} != ({b}, {b})", line
        )
    if not np.all(np.isfinite(rec.attention)) or np.any(rec.attention < 0):
        raise TraceParseError("attention entries must be finite and >= 0", line)
    for c in rec.confidence:
        if not 0.0 <= c <= 1.0:
            raise TraceParseError(f"confidence {c} outside [0, 1]", line)
    lo = header.prompt_len
    if not (lo <= rec.block_start <= header.seq_len - b):
        raise TraceParseError(f"block_start {rec.block_start} out of range", line)
    if (rec.block_start - lo) % b != 0:
        raise TraceParseError(f"block_start {rec.block_start} not block-aligned", line)
    for p, t in enumerate(rec.tokens):
        if t < 0 and t != MASK:
            raise TraceParseError(f"invalid token id {t} at position {p}", line)
    for p in rec.tokens[: header.prompt_len]:
        if p == MASK:
            raise TraceParseError("prompt positions must not be masked", line)
    if rec.committed is not None:
        masked = set(rec.masked())
        bad = [p for p in rec.committed if p not in masked]
        if bad:
            raise TraceParseError(
                f"committed positions {bad} are not masked block positions", line
            )


def write_trace(
    header: TraceHeader, records: Iterable[StepRecord], sink: IO[str]
) -> None:
    head = {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "seq_len": header.seq_len,
        "prompt_len": header.prompt_len,
        "block_len": header.block_len,
        "attention_scope": header.attention_scope,
        "layers_averaged": header.layers_averaged,
        "heads_averaged": header.heads_averaged,
    }
    sink.write(json.dumps(head, separators=(",", ":")) + "\n")
    for rec in records:
        _validate_record(header, rec, None)
        obj = {
            "step": rec.step,
            "block_start": rec.block_start,
            "tokens": list(rec.tokens),
            "greedy": list(rec.greedy),
            "confidence": list(rec.confidence),
            "attention": [float(x) for x in rec.attention.reshape(-1)],
        }
        if rec.committed is not None:
            obj["committed"] = list(rec.committed)
        sink.write(json.dumps(obj, separators=(",", ":")) + "\n")


def _require(obj: dict, key: str, line: int) -> object:
    if key not in obj:
        raise TraceParseError(f"missing field {key!r}", line)
    return obj[key]


def read_trace(source: Union[IO[str], str]) -> StepRecordFile:
    """Parse and validate a trace; errors name the offending line."""
    text = source if isinstance(source, str) else source.read()
    lines = text.splitlines()
    header: TraceHeader | None = None
    records: list[StepRecord] = []
    for n, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"invalid JSON: {exc.msg}", n) from exc
        if not isinstance(obj, dict):
            raise TraceParseError("expected a JSON object", n)
        if header is None:
            fmt = _require(obj, "format", n)
            if fmt != TRACE_FORMAT:
                raise TraceParseError(f"unknown format {fmt!r}", n)
            version = _require(obj, "version", n)
            if version != TRACE_VERSION:
                raise TraceParseError(
                    f"unsupported version {version!r}, expected {TRACE_VERSION}", n
                )
            try:
                header = TraceHeader(
                    seq_len=int(_require(obj, "seq_len", n)),  # type: ignore[arg-type]
                    prompt_len=int(_require(obj, "prompt_len", n)),  # type: ignore[arg-type]
                    block_len=int(_require(obj, "block_len", n)),  # type: ignore[arg-type]
                    layers_averaged=int(obj.get("layers_averaged", 0)),
                    heads_averaged=int(obj.get("heads_averaged", 0)),
                    attention_scope=str(obj.get("attention_scope", "block")),
                )
            except ValidationError as exc:
                raise TraceParseError(str(exc), n) from exc
            continue
        try:
            b = header.block_len
            attention = np.asarray(
                _require(obj, "attention", n), dtype=np.float64
            ).reshape(b, b)
            committed = obj.get("committed")
            rec = StepRecord(
                step=int(_require(obj, "step", n)),  # type: ignore[arg-type]
                block_start=int(_require(obj, "block_start", n)),  # type: ignore[arg-type]
                tokens=tuple(int(t) for t in _require(obj, "tokens", n)),  # type: ignore[union-attr]
                greedy=tuple(int(g) for g in _require(obj, "greedy", n)),  # type: ignore[union-attr]
                confidence=tuple(float(c) for c in _require(obj, "confidence", n)),  # type: ignore[union-attr]
                attention=attention,
                committed=None if committed is None else tuple(int(p) for p in committed),
            )
        except TraceParseError:
            raise
        except (TypeError, ValueError) as exc:
            raise TraceParseError(f"malformed record: {exc}", n) from exc
        _validate_record(header, rec, n)
        records.append(rec)
    if header is None:
        raise TraceParseError("empty input: missing header", 1)
    return StepRecordFile(header=header, records=tuple(records))


def verify_step(
    record: StepRecord, tau: float
) -> tuple[DecisionRecord, bool | None]:
    """Recompute the scheduling decision for one recorded step.

    Returns the decision plus an agreement flag against the recorded
    ``committed`` field, or ``None`` when the record carries none.
    """
    decision = schedule_clad(record.masked(), record.observation(), tau, record.step)
    if record.committed is None:
        return decision, None
    return decision, decision.committed == tuple(sorted(record.committed))


class TraceOracle:
    """Replays a recorded trace as the observation source of a decode.

    Each query serves the next record after checking that the live state
    still matches the recorded window, so any divergence between the
    live scheduler and the recorded run fails loudly instead of silently
    feeding stale observations.
    """

    def __init__(self, trace: StepRecordFile) -> None:
        if not trace.records:
            raise ContractViolation("trace has no step records to replay")
        self._trace = trace
        self._next = 0

    @property
    def header(self) -> TraceHeader:
        return self._trace.header

    def initial_state(self) -> SequenceState:
        h = self._trace.header
        tokens = self._trace.records[0].tokens
        gen_len = h.seq_len - h.prompt_len
        num_blocks = gen_len // h.block_len
        cursor = num_blocks
        for b in range(num_blocks):
            lo = h.prompt_len + b * h.block_len
            if any(t == MASK for t in tokens[lo : lo + h.block_len]):
                cursor = b
                break
        return SequenceState(
            tokens=tokens,
            prompt_len=h.prompt_len,
            gen_len=gen_len,
            block_len=h.block_len,
            block_cursor=cursor,
        )

    def observe(self, state: SequenceState) -> StepObservation:
        if self._next >= len(self._trace.records):
            raise ContractViolation(
                "trace exhausted before decoding finished; it does not cover "
                "the full generation region"
            )
        rec = self._trace.records[self._next]
        if rec.tokens != state.tokens:
            raise ContractViolation(
                f"live state diverged from the trace at step {self._next}: "
                "the recorded window no longer matches"
            )
        self._next += 1
        return rec.observation()

    def reference(self) -> None:
        return None
