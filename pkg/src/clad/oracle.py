"""Deterministic denoiser stand-in with planted ground truth.

The oracle fabricates, for any sequence state, the observation a real
denoiser would produce for the active block: greedy tokens, confidences
and a block-local attention matrix.  Instances plant two structures:

* easy spans — positions whose base confidence starts high, so they
  become candidates immediately and decode as contiguous clusters;
* coupled pairs ``(i, j)`` — while position ``i`` is still masked, the
  prediction at ``j`` is a wrong token and its confidence is dipped;
  once ``i`` is committed, ``j`` predicts its true token.  The attention
  matrix carries a strong symmetric weight between the two, so a
  conflict-aware scheduler can see the coupling that the confidences
  alone would hide.

Confidence grows with local context: each committed neighbor within a
small radius raises it, which makes decoding cascade outward from
committed regions.  Everything is a pure function of (instance, state).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .clusters import StepObservation
from .errors import ContractViolation, GenerationError
from .state import MASK, SequenceState, new_state

PRESET_NAMES = ("easy-spans", "planted-pairs", "hard-uniform")


@dataclass(frozen=True, slots=True)
class OracleParams:
    """Confidence and attention dynamics of the synthetic denoiser."""

    b_easy: float = 0.92
    b_hard: float = 0.55
    gain: float = 0.30
    radius: int = 2
    pair_dip: float = 0.05
    eps_attn: float = 0.01
    w_pair: float = 0.50
    noise_amp: float = 0.0

    def __post_init__(self) -> None:
        for name in ("b_easy", "b_hard", "gain", "pair_dip", "eps_attn", "w_pair"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise GenerationError(f"{name} = {v} outside [0, 1)")
        if self.radius < 1:
            raise GenerationError("radius must be >= 1")
        if self.noise_amp < 0.0:
            raise GenerationError("noise_amp must be >= 0")


#: Self-attention placed on the diagonal; stripped by symmetrization.
SELF_ATTENTION = 0.8

#: Confidences are capped below 1 so headroom always remains.
CONFIDENCE_CAP = 0.99


@dataclass(frozen=True, slots=True)
class CoupledPair:
    """Positions ``i < j`` (generation coordinates) with the wrong token
    ``alt`` that ``j`` predicts while ``i`` is masked."""

    i: int
    j: int
    alt: int


@dataclass(frozen=True, slots=True)
class InstanceSpec:
    """Layout request handed to :func:`generate_instance`."""

    gen_len: int
    block_len: int
    prompt_len: int = 0
    easy_spans: tuple[tuple[int, int], ...] = ()
    pairs: tuple[tuple[int, int], ...] = ()
    params: OracleParams = OracleParams()
    vocab_size: int = 1000


@dataclass(frozen=True)
class PlantedInstance:
    """Fully materialized synthetic instance with known ground truth."""

    gen_len: int
    block_len: int
    prompt_tokens: tuple[int, ...]
    target: tuple[int, ...]
    easy_spans: tuple[tuple[int, int], ...]
    pairs: tuple[CoupledPair, ...]
    params: OracleParams
    seed: int

    def __post_init__(self) -> None:
        easy = [False] * self.gen_len
        for l, r in self.easy_spans:
            for p in range(l, r + 1):
                easy[p] = True
        object.__setattr__(self, "_easy", tuple(easy))
        object.__setattr__(self, "_pair_at_j", {p.j: p for p in self.pairs})

    @property
    def prompt_len(self) -> int:
        return len(self.prompt_tokens)

    def is_easy(self, gen_pos: int) -> bool:
        return self._easy[gen_pos]  # type: ignore[attr-defined]

    def pair_with_j(self, gen_pos: int) -> CoupledPair | None:
        return self._pair_at_j.get(gen_pos)  # type: ignore[attr-defined]


def generate_instance(spec: InstanceSpec, seed: int) -> PlantedInstance:
    """Materialize a spec deterministically; reject infeasible layouts."""
    if spec.gen_len <= 0 or spec.block_len <= 0:
        raise GenerationError("gen_len and block_len must be positive")
    if spec.gen_len % spec.block_len != 0:
        raise GenerationError(
            f"gen_len {spec.gen_len} is not a multiple of block_len {spec.block_len}"
        )
    if spec.vocab_size < 2:
        raise GenerationError("vocab_size must be >= 2 to plant wrong tokens")
    easy = [False] * spec.gen_len
    for l, r in spec.easy_spans:
        if not (0 <= l <= r < spec.gen_len):
            raise GenerationError(f"easy span [{l}, {r}] outside the generation region")
        for p in range(l, r + 1):
            easy[p] = True
    used: set[int] = set()
    for i, j in spec.pairs:
        if not (0 <= i < j < spec.gen_len):
            raise GenerationError(f"pair ({i}, {j}) outside the generation region")
        if j - i < 2:
            raise GenerationError(
                f"pair ({i}, {j}) members are adjacent; a gap position is required"
            )
        if i in used or j in used:
            raise GenerationError(f"pair ({i}, {j}) overlaps another pair")
        used.update((i, j))
        if all(easy[p] for p in range(i, j + 1)):
            raise GenerationError(
                f"pair ({i}, {j}) lies inside one easy run with no gap; "
                "its members would always fall into a single cluster"
            )

    rng = np.random.default_rng(seed)
    prompt = tuple(int(t) for t in rng.integers(0, spec.vocab_size, spec.prompt_len))
    target = tuple(int(t) for t in rng.integers(0, spec.vocab_size, spec.gen_len))
    pairs = []
    for i, j in spec.pairs:
        offset = int(rng.integers(1, spec.vocab_size))
        pairs.append(CoupledPair(i=i, j=j, alt=(target[j] + offset) % spec.vocab_size))
    return PlantedInstance(
        gen_len=spec.gen_len,
        block_len=spec.block_len,
        prompt_tokens=prompt,
        target=target,
        easy_spans=spec.easy_spans,
        pairs=tuple(pairs),
        params=spec.params,
        seed=seed,
    )


def observe(instance: PlantedInstance, state: SequenceState) -> StepObservation:
    """Fabricate the forward-pass observation for the active block."""
    if (
        state.gen_len != instance.gen_len
        or state.block_len != instance.block_len
        or state.prompt_len != instance.prompt_len
    ):
        raise ContractViolation("state dimensions do not match the instance")
    block_start = state.active_block_start
    block_len = state.block_len
    prompt_len = instance.prompt_len
    par = instance.params

    confidence: list[float] = []
    greedy: list[int] = []
    for k in range(block_len):
        p = block_start + k
        g = p - prompt_len
        base = par.b_easy if instance.is_easy(g) else par.b_hard

        revealed = 0
        for q in range(
            max(block_start, p - par.radius),
            min(block_start + block_len, p + par.radius + 1),
        ):
            if q != p and state.tokens[q] != MASK:
                revealed += 1
        rho = revealed / (2 * par.radius)

        pair = instance.pair_with_j(g)
        partner_masked = (
            pair is not None and state.tokens[prompt_len + pair.i] == MASK
        )
        dip = par.pair_dip if partner_masked else 0.0
        confidence.append(min(max(base + par.gain * rho - dip, 0.0), CONFIDENCE_CAP))

        if state.tokens[p] != MASK:
            greedy.append(state.tokens[p])  # visible tokens carry over
        elif partner_masked:
            greedy.append(pair.alt)  # type: ignore[union-attr]
        else:
            greedy.append(instance.target[g])

    if par.noise_amp > 0.0:
        key = zlib.crc32(np.asarray(state.tokens, dtype=np.int64).tobytes())
        noise_rng = np.random.default_rng(np.random.SeedSequence((instance.seed, key)))
        noise = noise_rng.uniform(-par.noise_amp, par.noise_amp, block_len)
        confidence = [
            min(max(c + float(n), 0.0), CONFIDENCE_CAP)
            for c, n in zip(confidence, noise)
        ]

    attention = np.full((block_len, block_len), par.eps_attn, dtype=np.float64)
    for pair in instance.pairs:
        ai = prompt_len + pair.i
        aj = prompt_len + pair.j
        if block_start <= ai < block_start + block_len and block_start <= aj < block_start + block_len:
            ri, rj = ai - block_start, aj - block_start
            attention[ri, rj] += par.w_pair
            attention[rj, ri] += par.w_pair
    np.fill_diagonal(attention, SELF_ATTENTION)

    return StepObservation(
        block_start=block_start,
        block_len=block_len,
        greedy=tuple(greedy),
        confidence=tuple(confidence),
        attention=attention,
    )


class SyntheticOracle:
    """Adapter giving a planted instance the driver's oracle interface."""

    def __init__(self, instance: PlantedInstance) -> None:
        self.instance = instance

    def initial_state(self) -> SequenceState:
        return new_state(
            self.instance.prompt_tokens, self.instance.gen_len, self.instance.block_len
        )

    def observe(self, state: SequenceState) -> StepObservation:
        return observe(self.instance, state)

    def reference(self) -> tuple[int, ...]:
        return self.instance.prompt_tokens + self.instance.target


def preset_spec(name: str, gen_len: int, block_len: int, seed: int) -> InstanceSpec:
    """Pinned instance layouts used by the harness and the test suite.

    * ``easy-spans`` — length-8 high-confidence spans separated by single
      hard positions, tiled across the generation region.
    * ``planted-pairs`` — per block: two easy spans flanking one coupled
      pair whose members sit isolated between hard positions.  The dip is
      small enough that both members clear a 0.9 cutoff in the very first
      observation of their block, so a pure-threshold rule commits them
      together and springs the trap.
    * ``hard-uniform`` — uniformly low base confidence everywhere.
    """
    if name == "easy-spans":
        spans = tuple(
            (s, min(s + 7, gen_len - 1)) for s in range(0, gen_len, 9)
        )
        return InstanceSpec(
            gen_len=gen_len, block_len=block_len, easy_spans=spans, pairs=()
        )
    if name == "planted-pairs":
        if block_len < 12:
            raise GenerationError("planted-pairs requires block_len >= 12")
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x1A70)))
        spans: list[tuple[int, int]] = []
        pairs: list[tuple[int, int]] = []
        for b in range(gen_len // block_len):
            base = b * block_len
            lo, hi = 4, block_len - 8
            mid = min(max(block_len // 2 - 2, lo), hi)
            jitter = int(rng.integers(-2, 3))
            i_rel = min(max(mid + jitter, lo), hi)
            j_rel = i_rel + 3
            spans.append((base + 2, base + i_rel - 2))
            spans.append((base + j_rel + 2, base + block_len - 3))
            spans.append((base + i_rel, base + i_rel))
            spans.append((base + j_rel, base + j_rel))
            pairs.append((base + i_rel, base + j_rel))
        params = OracleParams(pair_dip=0.01)
        return InstanceSpec(
            gen_len=gen_len,
            block_len=block_len,
            easy_spans=tuple(spans),
            pairs=tuple(pairs),
            params=params,
        )
    if name == "hard-uniform":
        return InstanceSpec(gen_len=gen_len, block_len=block_len)
    raise GenerationError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")


def preset_instance(
    name: str, gen_len: int, block_len: int, seed: int
) -> PlantedInstance:
    return generate_instance(preset_spec(name, gen_len, block_len, seed), seed)


def random_spec(gen_len: int, block_len: int, rng: np.random.Generator) -> InstanceSpec:
    """Random feasible layout mixing hard runs, easy spans and pairs.

    Used to fuzz the decoders: any instance this returns must decode to
    completion under every commitment rule.
    """
    easy: list[tuple[int, int]] = []
    pairs: list[tuple[int, int]] = []
    p = 0
    while p < gen_len:
        kind = rng.choice(("hard", "easy", "pair"), p=(0.35, 0.45, 0.2))
        if kind == "hard":
            p += int(rng.integers(1, 5))
        elif kind == "easy":
            ln = int(rng.integers(1, 9))
            r = min(p + ln - 1, gen_len - 1)
            easy.append((p, r))
            p = r + 2  # one hard separator keeps spans maximal
        else:
            gap = int(rng.integers(1, 3))
            j = p + 1 + gap
            if j >= gen_len:
                p = gen_len
                continue
            if rng.random() < 0.7:
                easy.append((p, p))
                easy.append((j, j))
            pairs.append((p, j))
            p = j + 2
    dip = float(rng.uniform(0.0, 0.2))
    params = OracleParams(pair_dip=dip)
    return InstanceSpec(
        gen_len=gen_len,
        block_len=block_len,
        easy_spans=tuple(easy),
        pairs=tuple(pairs),
        params=params,
    )
