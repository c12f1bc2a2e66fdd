"""Run metrics and their JSON / CSV renderings.

Throughput is counted in forward passes, the hardware-independent unit:
``tps_proxy`` is tokens committed per pass, and ``speedup_proxy`` is
relative to the top-1 baseline, which always spends exactly one pass per
token.  Histograms map a per-step count (committed tokens, clusters,
edges) to the number of steps it occurred in; their total mass always
equals ``forward_passes``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

from .decoding import DecodeResult
from .state import DecoderConfig

#: Fixed column order of sweep tables.
CSV_COLUMNS = (
    "decoder_kind",
    "tau",
    "threshold",
    "block_len",
    "gen_len",
    "seed",
    "forward_passes",
    "tokens_committed",
    "tps_proxy",
    "speedup_proxy",
    "match_rate",
    "fallback_count",
    "committed_hist",
    "cluster_hist",
    "edge_hist",
)


@dataclass(frozen=True)
class RunMetrics:
    decoder_kind: str
    tau: float
    threshold: float
    block_len: int
    gen_len: int
    seed: int
    forward_passes: int
    tokens_committed: int
    tps_proxy: float
    speedup_proxy: float
    match_rate: float | None
    fallback_count: int
    committed_hist: dict[int, int]
    cluster_hist: dict[int, int]
    edge_hist: dict[int, int]


def metrics_from_result(result: DecodeResult, config: DecoderConfig) -> RunMetrics:
    tokens = sum(result.committed_counts)
    passes = result.forward_passes
    return RunMetrics(
        decoder_kind=config.decoder_kind,
        tau=config.tau,
        threshold=config.threshold,
        block_len=config.block_len,
        gen_len=config.gen_len,
        seed=config.seed,
        forward_passes=passes,
        tokens_committed=tokens,
        tps_proxy=tokens / passes,
        speedup_proxy=config.gen_len / passes,
        match_rate=result.match_rate,
        fallback_count=sum(1 for r in result.records if r.fallback_used),
        committed_hist=dict(Counter(result.committed_counts)),
        cluster_hist=dict(Counter(len(r.clusters) for r in result.records)),
        edge_hist=dict(Counter(len(r.edges) for r in result.records)),
    )


def _hist_to_json(hist: dict[int, int]) -> dict[str, int]:
    return {str(k): hist[k] for k in sorted(hist)}


def _hist_to_cell(hist: dict[int, int]) -> str:
    return ";".join(f"{k}:{hist[k]}" for k in sorted(hist))


def metrics_to_dict(m: RunMetrics) -> dict:
    return {
        "decoder_kind": m.decoder_kind,
        "tau": m.tau,
        "threshold": m.threshold,
        "block_len": m.block_len,
        "gen_len": m.gen_len,
        "seed": m.seed,
        "forward_passes": m.forward_passes,
        "tokens_committed": m.tokens_committed,
        "tps_proxy": m.tps_proxy,
        "speedup_proxy": m.speedup_proxy,
        "match_rate": m.match_rate,
        "fallback_count": m.fallback_count,
        "committed_hist": _hist_to_json(m.committed_hist),
        "cluster_hist": _hist_to_json(m.cluster_hist),
        "edge_hist": _hist_to_json(m.edge_hist),
    }


def metrics_to_json(m: RunMetrics) -> str:
    return json.dumps(metrics_to_dict(m), indent=2, sort_keys=False) + "\n"


def metrics_to_csv_row(m: RunMetrics) -> str:
    values = {
        **metrics_to_dict(m),
        "match_rate": "" if m.match_rate is None else repr(m.match_rate),
        "committed_hist": _hist_to_cell(m.committed_hist),
        "cluster_hist": _hist_to_cell(m.cluster_hist),
        "edge_hist": _hist_to_cell(m.edge_hist),
    }
    return ",".join(str(values[col]) for col in CSV_COLUMNS)


def sweep_to_csv(rows: list[RunMetrics]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(metrics_to_csv_row(m) for m in rows)
    return "\n".join(lines) + "\n"
