"""Sequence state machine with absorbing-mask semantics.

A sequence is a fixed-length window: an immutable prompt prefix followed
by a generation region that starts fully masked and is revealed in
consecutive fixed-size blocks.  Committing writes tokens into masked
positions of the active block only; a committed position never changes
again.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, ContractViolation

#: Reserved mask sentinel.  Deliberately outside the non-negative token-id
#: space so the mask symbol itself can never be committed as a token.
MASK = -1

DECODER_KINDS = ("clad", "vanilla", "threshold")


@dataclass(frozen=True, slots=True)
class SequenceState:
    """Immutable snapshot of a partially decoded sequence.

    ``tokens`` holds the full window (prompt + generation); masked
    positions carry :data:`MASK`.  ``block_cursor`` indexes the active
    block; all earlier blocks are fully committed.
    """

    tokens: tuple[int, ...]
    prompt_len: int
    gen_len: int
    block_len: int
    block_cursor: int = 0

    def __post_init__(self) -> None:
        if self.gen_len <= 0 or self.block_len <= 0:
            raise ConfigError("gen_len and block_len must be positive")
        if self.gen_len % self.block_len != 0:
            raise ConfigError(
                f"gen_len {self.gen_len} is not a multiple of block_len {self.block_len}"
            )
        if self.prompt_len < 0:
            raise ConfigError("prompt_len must be >= 0")
        if len(self.tokens) != self.prompt_len + self.gen_len:
            raise ConfigError(
                f"token window has {len(self.tokens)} positions, expected "
                f"{self.prompt_len + self.gen_len}"
            )
        if not 0 <= self.block_cursor <= self.num_blocks:
            raise ConfigError("block_cursor out of range")
        for p in range(self.prompt_len):
            if self.tokens[p] == MASK:
                raise ConfigError(f"prompt position {p} is masked")
        for p, tok in enumerate(self.tokens):
            if tok < 0 and tok != MASK:
                raise ConfigError(f"position {p} holds invalid token id {tok}")
        # Blocks behind the cursor must be fully committed.
        for b in range(self.block_cursor):
            lo, hi = self.block_bounds(b)
            if any(self.tokens[p] == MASK for p in range(lo, hi)):
                raise ConfigError(f"completed block {b} still contains masked positions")

    @property
    def num_blocks(self) -> int:
        return self.gen_len // self.block_len

    @property
    def finished(self) -> bool:
        return self.block_cursor >= self.num_blocks

    def block_bounds(self, block: int) -> tuple[int, int]:
        """Half-open absolute bounds ``[start, end)`` of ``block``."""
        start = self.prompt_len + block * self.block_len
        return start, start + self.block_len

    @property
    def active_block_start(self) -> int:
        if self.finished:
            raise ContractViolation("no active block: decoding is finished")
        return self.block_bounds(self.block_cursor)[0]


def new_state(
    prompt_tokens: Sequence[int], gen_len: int, block_len: int
) -> SequenceState:
    """Fresh state: prompt as given, generation region entirely masked."""
    tokens = tuple(prompt_tokens) + (MASK,) * gen_len
    return SequenceState(
        tokens=tokens,
        prompt_len=len(prompt_tokens),
        gen_len=gen_len,
        block_len=block_len,
        block_cursor=0,
    )


def masked_positions(state: SequenceState) -> tuple[int, ...]:
    """Ascending absolute positions still masked in the active block.

    Empty when the active block is complete, i.e. when decoding finished.
    """
    if state.finished:
        return ()
    lo, hi = state.block_bounds(state.block_cursor)
    return tuple(p for p in range(lo, hi) if state.tokens[p] == MASK)


def commit(
    state: SequenceState,
    update_set: Iterable[int],
    tokens_for: Mapping[int, int],
) -> SequenceState:
    """Write tokens into masked positions of the active block.

    Every position in ``update_set`` must currently be masked and inside
    the active block; all other positions are carried over unchanged.
    The block cursor advances when the active block has no mask left.
    """
    positions = sorted(set(update_set))
    if not positions:
        return state
    if state.finished:
        raise ContractViolation("cannot commit: decoding is finished")
    lo, hi = state.block_bounds(state.block_cursor)
    new_tokens = list(state.tokens)
    for p in positions:
        if not lo <= p < hi:
            raise ContractViolation(
                f"position {p} is outside the active block [{lo}, {hi})"
            )
        if state.tokens[p] != MASK:
            raise ContractViolation(f"position {p} is already committed")
        tok = tokens_for[p]
        if tok < 0:
            raise ContractViolation(f"cannot commit invalid token id {tok} at {p}")
        new_tokens[p] = tok
    cursor = state.block_cursor
    if all(new_tokens[p] != MASK for p in range(lo, hi)):
        cursor += 1
    return replace(state, tokens=tuple(new_tokens), block_cursor=cursor)


@dataclass(frozen=True, slots=True)
class DecoderConfig:
    """Tunables for one decode run."""

    tau: float = 0.75
    block_len: int = 32
    gen_len: int = 256
    decoder_kind: str = "clad"
    threshold: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.decoder_kind not in DECODER_KINDS:
            raise ConfigError(
                f"decoder_kind must be one of {DECODER_KINDS}, got {self.decoder_kind!r}"
            )
        if self.gen_len <= 0 or self.block_len <= 0:
            raise ConfigError("gen_len and block_len must be positive")
        if self.gen_len % self.block_len != 0:
            raise ConfigError(
                f"gen_len {self.gen_len} is not a multiple of block_len {self.block_len}"
            )
