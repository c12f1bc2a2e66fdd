"""Decode, replay and sweep as a stateless compute service.

The request/response models double as the package's external schema:
the FastAPI app exposes them over HTTP for long-running or multi-client
use, and the CLI builds the same requests and calls the same functions
in-process.  Both surfaces therefore compute byte-identical results.
"""

from __future__ import annotations

import io
from itertools import product
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, model_validator

from .decoding import DecodeResult, DecodeTrace, decode
from .errors import CladError, ConfigError, TraceParseError
from .metrics import RunMetrics, metrics_from_result, metrics_to_dict, sweep_to_csv
from .oracle import PRESET_NAMES, SyntheticOracle, preset_instance
from .state import DecoderConfig
from .trace import (
    StepRecord,
    TraceHeader,
    TraceOracle,
    read_trace,
    verify_step,
    write_trace,
)

DEFAULT_TAU = 0.75
DEFAULT_THRESHOLD = 0.9
DEFAULT_GEN_LEN = 256
DEFAULT_BLOCK_LEN = 32


class DecodeRequest(BaseModel):
    oracle: Literal["synthetic", "trace"] = "synthetic"
    preset: Optional[str] = None
    decoder: Literal["clad", "vanilla", "threshold"] = "clad"
    tau: float = Field(default=DEFAULT_TAU, gt=0.0, le=1.0)
    threshold: float = Field(default=DEFAULT_THRESHOLD, gt=0.0, le=1.0)
    gen_len: Optional[int] = Field(default=None, gt=0)
    block_len: Optional[int] = Field(default=None, gt=0)
    seed: int = 0
    trace_text: Optional[str] = None
    emit_trace: bool = False

    @model_validator(mode="after")
    def _check_oracle_inputs(self) -> "DecodeRequest":
        if self.oracle == "trace" and self.trace_text is None:
            raise ValueError("oracle='trace' requires trace_text")
        if self.oracle == "synthetic" and self.trace_text is not None:
            raise ValueError("trace_text is only valid with oracle='trace'")
        if self.oracle == "trace" and self.preset is not None:
            raise ValueError("preset is only valid with oracle='synthetic'")
        return self


class DecodeResponse(BaseModel):
    metrics: dict
    final_tokens: list[int]
    step_candidate_counts: list[int]
    step_committed: list[list[int]]
    trace_text: Optional[str] = None


class ReplayRequest(BaseModel):
    trace_text: str
    tau: float = Field(default=DEFAULT_TAU, gt=0.0, le=1.0)


class StepDecision(BaseModel):
    step: int
    masked: list[int]
    candidates: list[int]
    clusters: list[list[int]]
    edges: list[list[int]]
    chosen: list[int]
    committed: list[int]
    fallback_used: bool
    recorded_committed: Optional[list[int]] = None
    agreement: Optional[bool] = None


class ReplayResponse(BaseModel):
    decisions: list[StepDecision]
    records: int
    applicable: int
    agreed: int
    agreement_rate: Optional[float] = None


class SweepRequest(BaseModel):
    preset: str = "easy-spans"
    decoders: list[Literal["clad", "vanilla", "threshold"]] = ["clad"]
    taus: list[float] = [DEFAULT_TAU]
    block_lens: list[int] = [DEFAULT_BLOCK_LEN]
    gen_lens: list[int] = [DEFAULT_GEN_LEN]
    seeds: list[int] = [0]
    threshold: float = Field(default=DEFAULT_THRESHOLD, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_grid(self) -> "SweepRequest":
        if not (self.decoders and self.taus and self.block_lens and self.gen_lens and self.seeds):
            raise ValueError("sweep grid is empty")
        for t in self.taus:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"tau {t} outside (0, 1]")
        return self


class SweepResponse(BaseModel):
    rows: list[dict]
    csv: str


def _decode_once(req: DecodeRequest) -> tuple[DecodeResult, DecodeTrace | None, DecoderConfig, TraceOracle | SyntheticOracle]:
    if req.oracle == "synthetic":
        gen_len = req.gen_len if req.gen_len is not None else DEFAULT_GEN_LEN
        block_len = req.block_len if req.block_len is not None else DEFAULT_BLOCK_LEN
        instance = preset_instance(
            req.preset or "easy-spans", gen_len, block_len, req.seed
        )
        oracle: TraceOracle | SyntheticOracle = SyntheticOracle(instance)
    else:
        parsed = read_trace(req.trace_text or "")
        oracle = TraceOracle(parsed)
        header = parsed.header
        gen_len = header.seq_len - header.prompt_len
        block_len = header.block_len
        if req.gen_len is not None and req.gen_len != gen_len:
            raise ConfigError(
                f"requested gen_len {req.gen_len} != trace generation length {gen_len}"
            )
        if req.block_len is not None and req.block_len != block_len:
            raise ConfigError(
                f"requested block_len {req.block_len} != trace block_len {block_len}"
            )
    config = DecoderConfig(
        tau=req.tau,
        block_len=block_len,
        gen_len=gen_len,
        decoder_kind=req.decoder,
        threshold=req.threshold,
        seed=req.seed,
    )
    result, captured = decode(oracle, config, capture=req.emit_trace)
    return result, captured, config, oracle


def _render_trace(
    result: DecodeResult, captured: DecodeTrace, config: DecoderConfig, oracle
) -> str:
    state = oracle.initial_state()
    header = TraceHeader(
        seq_len=len(state.tokens),
        prompt_len=state.prompt_len,
        block_len=config.block_len,
    )
    records = [
        StepRecord(
            step=rec.step,
            block_start=obs.block_start,
            tokens=tokens,
            greedy=obs.greedy,
            confidence=obs.confidence,
            attention=obs.attention,
            committed=rec.committed,
        )
        for tokens, obs, rec in zip(
            captured.pre_tokens, captured.observations, result.records
        )
    ]
    sink = io.StringIO()
    write_trace(header, records, sink)
    return sink.getvalue()


def run_decode(req: DecodeRequest) -> DecodeResponse:
    """Run one closed-loop decode and assemble its metrics."""
    result, captured, config, oracle = _decode_once(req)
    trace_text = None
    if req.emit_trace and captured is not None:
        trace_text = _render_trace(result, captured, config, oracle)
    metrics = metrics_from_result(result, config)
    return DecodeResponse(
        metrics=metrics_to_dict(metrics),
        final_tokens=list(result.final_tokens),
        step_candidate_counts=[len(r.candidates) for r in result.records],
        step_committed=[list(r.committed) for r in result.records],
        trace_text=trace_text,
    )


def run_replay(req: ReplayRequest) -> ReplayResponse:
    """Re-run the scheduler over every recorded step of a trace."""
    parsed = read_trace(req.trace_text)
    decisions: list[StepDecision] = []
    applicable = 0
    agreed = 0
    for rec in parsed.records:
        decision, agreement = verify_step(rec, req.tau)
        if agreement is not None:
            applicable += 1
            agreed += int(agreement)
        decisions.append(
            StepDecision(
                step=decision.step,
                masked=list(decision.masked),
                candidates=list(decision.candidates),
                clusters=[[c.l, c.r] for c in decision.clusters],
                edges=[list(e) for e in decision.edges],
                chosen=list(decision.chosen),
                committed=list(decision.committed),
                fallback_used=decision.fallback_used,
                recorded_committed=None if rec.committed is None else list(rec.committed),
                agreement=agreement,
            )
        )
    rate = agreed / applicable if applicable else None
    return ReplayResponse(
        decisions=decisions,
        records=len(parsed.records),
        applicable=applicable,
        agreed=agreed,
        agreement_rate=rate,
    )


def run_sweep(req: SweepRequest) -> SweepResponse:
    """Grid of decode runs; one row per cell in a stable nested order."""
    rows: list[RunMetrics] = []
    for decoder, tau, block_len, gen_len, seed in product(
        req.decoders, req.taus, req.block_lens, req.gen_lens, req.seeds
    ):
        cell = DecodeRequest(
            oracle="synthetic",
            preset=req.preset,
            decoder=decoder,
            tau=tau,
            threshold=req.threshold,
            gen_len=gen_len,
            block_len=block_len,
            seed=seed,
        )
        result, _, config, _ = _decode_once(cell)
        rows.append(metrics_from_result(result, config))
    return SweepResponse(
        rows=[metrics_to_dict(m) for m in rows],
        csv=sweep_to_csv(rows),
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="clad",
        description="Cluster-level attention-guided decoding engine",
        version="0.1.0",
    )

    def _guard(fn, *args):
        try:
            return fn(*args)
        except TraceParseError as exc:
            raise HTTPException(status_code=400, detail=f"trace parse error: {exc}")
        except CladError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/presets")
    def presets() -> dict:
        return {"presets": list(PRESET_NAMES)}

    @app.post("/decode", response_model=DecodeResponse)
    def decode_endpoint(req: DecodeRequest) -> DecodeResponse:
        return _guard(run_decode, req)

    @app.post("/replay", response_model=ReplayResponse)
    def replay_endpoint(req: ReplayRequest) -> ReplayResponse:
        return _guard(run_replay, req)

    @app.post("/sweep", response_model=SweepResponse)
    def sweep_endpoint(req: SweepRequest) -> SweepResponse:
        return _guard(run_sweep, req)

    return app


app = create_app()
