"""Per-step schedulers and the closed-loop decode driver."""

from __future__ import annotations

import numpy as np
import pytest

from clad import (
    MASK,
    ContractViolation,
    ConfigError,
    DecoderConfig,
    InstanceSpec,
    StepObservation,
    SyntheticOracle,
    clad_step,
    decode,
    generate_instance,
    masked_positions,
    new_state,
    preset_instance,
    random_spec,
    schedule_clad,
    threshold_step,
    vanilla_step,
)


def make_obs(block_start, confidence, greedy=None, attention=None):
    n = len(confidence)
    return StepObservation(
        block_start=block_start,
        block_len=n,
        greedy=tuple(greedy) if greedy is not None else tuple(range(100, 100 + n)),
        confidence=tuple(confidence),
        attention=attention if attention is not None else np.full((n, n), 0.01),
    )


def oracle_for(name, gen_len, block_len, seed=0):
    return SyntheticOracle(preset_instance(name, gen_len, block_len, seed))


def test_clad_step_whole_block_single_cluster():
    # everything confident and contiguous: one cluster, pairwise stage
    # skipped, the entire block commits in one step
    state = new_state((1, 2), gen_len=4, block_len=4)
    obs = make_obs(2, [0.9, 0.8, 0.95, 0.76])
    state2, rec = clad_step(state, obs, tau=0.75)
    assert rec.committed == (2, 3, 4, 5)
    assert len(rec.clusters) == 1
    assert rec.edges == ()
    assert not rec.fallback_used
    assert state2.finished
    assert state2.tokens[2:] == (100, 101, 102, 103)


def test_clad_step_fallback_on_empty_candidates():
    state = new_state((), gen_len=4, block_len=4)
    obs = make_obs(0, [0.3, 0.6, 0.2, 0.6])
    state2, rec = clad_step(state, obs, tau=0.75)
    assert rec.fallback_used
    assert rec.candidates == ()
    assert rec.committed == (1,)  # confidence tie broken toward lowest position
    assert masked_positions(state2) == (0, 2, 3)


def test_clad_step_planted_pair_defers_one_member():
    inst = generate_instance(
        InstanceSpec(
            gen_len=12,
            block_len=12,
            easy_spans=((4, 4), (7, 7)),
            pairs=((4, 7),),
        ),
        seed=3,
    )
    oracle = SyntheticOracle(inst)
    state = oracle.initial_state()
    state, rec1 = clad_step(state, oracle.observe(state), tau=0.75)
    assert [(c.l, c.r) for c in rec1.clusters] == [(4, 4), (7, 7)]
    assert rec1.edges == ((0, 1),)
    assert rec1.committed == (4,)  # equal weights: leftmost wins
    state, rec2 = clad_step(state, oracle.observe(state), tau=0.75)
    assert rec2.committed == (7,)  # deferred member commits next step
    assert state.tokens[7] == inst.target[7]


def test_clad_step_rejects_block_mismatch():
    state = new_state((), gen_len=8, block_len=4)
    obs = make_obs(4, [0.9] * 4)
    with pytest.raises(ContractViolation):
        clad_step(state, obs, tau=0.75)


def test_clad_step_requires_masked():
    state = new_state((), gen_len=4, block_len=4)
    obs = make_obs(0, [0.9] * 4)
    state, _ = clad_step(state, obs, tau=0.75)
    with pytest.raises(ContractViolation):
        clad_step(state, obs, tau=0.75)


def test_vanilla_step_commits_exactly_one():
    state = new_state((), gen_len=4, block_len=4)
    obs = make_obs(0, [0.1, 0.9, 0.9, 0.3])
    state2, rec = vanilla_step(state, obs)
    assert rec.committed == (1,)  # tie toward lowest position
    assert not rec.fallback_used
    assert len(masked_positions(state2)) == 3


def test_vanilla_block_takes_block_len_passes():
    oracle = oracle_for("easy-spans", 16, 16)
    result, _ = decode(oracle, DecoderConfig(gen_len=16, block_len=16, decoder_kind="vanilla"))
    assert result.forward_passes == 16
    assert result.committed_counts == (1,) * 16


def test_threshold_step_commits_all_above():
    state = new_state((), gen_len=3, block_len=3)
    obs = make_obs(0, [0.95, 0.91, 0.4])
    state2, rec = threshold_step(state, obs, threshold=0.9)
    assert rec.committed == (0, 1)
    assert not rec.fallback_used


def test_threshold_step_fallback_when_none_qualify():
    state = new_state((), gen_len=3, block_len=3)
    obs = make_obs(0, [0.5, 0.7, 0.6])
    state2, rec = threshold_step(state, obs, threshold=0.9)
    assert rec.committed == (1,)
    assert rec.fallback_used


def test_threshold_step_whole_block_in_one_pass():
    state = new_state((), gen_len=3, block_len=3)
    obs = make_obs(0, [0.95, 0.93, 0.91])
    state2, rec = threshold_step(state, obs, threshold=0.9)
    assert rec.committed == (0, 1, 2)
    assert state2.finished


def test_decode_all_easy_single_pass_vs_vanilla():
    # every confidence clears tau at step one: one cluster, one pass;
    # the top-1 baseline needs one pass per token
    spec = InstanceSpec(gen_len=16, block_len=16, easy_spans=((0, 15),))
    inst = generate_instance(spec, seed=1)
    clad_result, _ = decode(
        SyntheticOracle(inst), DecoderConfig(gen_len=16, block_len=16)
    )
    assert clad_result.forward_passes == 1
    assert clad_result.committed_counts == (16,)
    assert clad_result.match_rate == 1.0

    vanilla_result, _ = decode(
        SyntheticOracle(inst),
        DecoderConfig(gen_len=16, block_len=16, decoder_kind="vanilla"),
    )
    assert vanilla_result.forward_passes == 16
    assert vanilla_result.match_rate == 1.0


def test_decode_planted_pairs_outcomes():
    inst = preset_instance("planted-pairs", 64, 32, seed=7)
    clad_result, _ = decode(
        SyntheticOracle(inst), DecoderConfig(gen_len=64, block_len=32)
    )
    threshold_result, _ = decode(
        SyntheticOracle(inst),
        DecoderConfig(gen_len=64, block_len=32, decoder_kind="threshold"),
    )
    assert clad_result.match_rate == 1.0
    assert threshold_result.match_rate < 1.0


def test_decode_rejects_mismatched_config():
    oracle = oracle_for("easy-spans", 32, 32)
    with pytest.raises(ConfigError):
        decode(oracle, DecoderConfig(gen_len=64, block_len=32))


def test_decode_deterministic():
    cfg = DecoderConfig(gen_len=64, block_len=16)
    a, _ = decode(oracle_for("planted-pairs", 64, 16, seed=5), cfg)
    b, _ = decode(oracle_for("planted-pairs", 64, 16, seed=5), cfg)
    assert a == b


def test_decode_progress_and_termination_random():
    rng = np.random.default_rng(11)
    for _ in range(25):
        block = int(rng.choice((8, 12, 16)))
        gen = block * int(rng.integers(1, 4))
        inst = generate_instance(random_spec(gen, block, rng), seed=int(rng.integers(1e6)))
        for kind in ("clad", "vanilla", "threshold"):
            result, _ = decode(
                SyntheticOracle(inst),
                DecoderConfig(gen_len=gen, block_len=block, decoder_kind=kind),
            )
            assert all(t != MASK for t in result.final_tokens)
            assert all(c >= 1 for c in result.committed_counts)
            assert result.forward_passes <= gen
            assert sum(result.committed_counts) == gen


def test_decode_baseline_dominance_random():
    rng = np.random.default_rng(13)
    for _ in range(15):
        block = int(rng.choice((8, 16)))
        gen = block * int(rng.integers(1, 4))
        inst = generate_instance(random_spec(gen, block, rng), seed=int(rng.integers(1e6)))
        clad_r, _ = decode(
            SyntheticOracle(inst), DecoderConfig(gen_len=gen, block_len=block)
        )
        van_r, _ = decode(
            SyntheticOracle(inst),
            DecoderConfig(gen_len=gen, block_len=block, decoder_kind="vanilla"),
        )
        assert clad_r.forward_passes <= van_r.forward_passes
        assert van_r.forward_passes == gen


def test_decode_order_safety():
    oracle = oracle_for("planted-pairs", 64, 32, seed=3)
    result, _ = decode(oracle, DecoderConfig(gen_len=64, block_len=32))
    seen: set[int] = set()
    for rec in result.records:
        assert set(rec.committed) <= set(rec.masked)
        assert not (set(rec.committed) & seen)
        seen.update(rec.committed)
    assert len(seen) == 64


def test_replay_equivalence_reproduces_full_records():
    # feeding captured observations back through the scheduler recreates
    # every decision record exactly, field for field
    inst = preset_instance("planted-pairs", 64, 32, seed=6)
    cfg = DecoderConfig(gen_len=64, block_len=32)
    result, captured = decode(SyntheticOracle(inst), cfg, capture=True)
    assert captured is not None
    for rec, obs, pre in zip(result.records, captured.observations, captured.pre_tokens):
        masked = tuple(
            p
            for p in range(obs.block_start, obs.block_start + obs.block_len)
            if pre[p] == MASK
        )
        assert schedule_clad(masked, obs, cfg.tau, rec.step) == rec


def test_schedule_clad_empty_masked_is_noop():
    obs = make_obs(0, [0.9, 0.9])
    rec = schedule_clad((), obs, tau=0.75)
    assert rec.committed == ()
    assert not rec.fallback_used


def test_decision_record_invariants_enforced():
    from clad.clusters import ClusterSet
    from clad.decoding import DecisionRecord

    with pytest.raises(ContractViolation):
        DecisionRecord(
            step=0,
            decoder_kind="clad",
            masked=(1, 2),
            candidates=(),
            clusters=ClusterSet(),
            edges=(),
            chosen=(),
            committed=(3,),  # not masked
            fallback_used=False,
        )
    with pytest.raises(ContractViolation):
        DecisionRecord(
            step=0,
            decoder_kind="clad",
            masked=(1, 2),
            candidates=(1,),
            clusters=ClusterSet(),
            edges=(),
            chosen=(),
            committed=(1,),
            fallback_used=True,  # fallback with candidates present
        )
