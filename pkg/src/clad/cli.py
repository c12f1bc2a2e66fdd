"""Command-line front end.

Thin client over the service layer: each subcommand builds the same
request model the HTTP API accepts, runs it in-process, and handles file
I/O.  Exit codes are disciplined so CI can tell failure families apart:

* 0 — success
* 1 — internal engine error
* 2 — usage error (bad flags, infeasible configuration)
* 3 — trace parse error
* 4 — contract violation (divergent replay, malformed upstream data)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pydantic import ValidationError as PydanticValidationError

from .errors import (
    CladError,
    ConfigError,
    ContractViolation,
    GenerationError,
    TraceParseError,
)
from .service import (
    DEFAULT_TAU,
    DEFAULT_THRESHOLD,
    DecodeRequest,
    ReplayRequest,
    SweepRequest,
    run_decode,
    run_replay,
    run_sweep,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONTRACT = 4


class UsageError(Exception):
    pass


def _parse_tau_spec(text: str) -> list[float]:
    """A single value ``0.75`` or an inclusive range ``0.6:0.95:0.05``."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"tau range must be A:B:STEP, got {text!r}")
        try:
            a, b, step = (float(p) for p in parts)
        except ValueError:
            raise UsageError(f"tau range must be numeric, got {text!r}")
        if step <= 0 or b < a:
            raise UsageError(f"tau range {text!r} is empty or descending")
        n = int(round((b - a) / step))
        values = [round(a + k * step, 12) for k in range(n + 1)]
        return [v for v in values if v <= b + 1e-12]
    try:
        return [float(text)]
    except ValueError:
        raise UsageError(f"invalid tau {text!r}")


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p != ""]
    except ValueError:
        raise UsageError(f"{flag} expects a comma-separated integer list, got {text!r}")


def _check_unit_interval(value: float, flag: str) -> float:
    if not 0.0 < value <= 1.0:
        raise UsageError(f"{flag} must be in (0, 1], got {value}")
    return value


def _write_or_print(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _read_trace_file(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"trace file not found: {path}")
    return p.read_text()


def _cmd_decode(args: argparse.Namespace) -> int:
    _check_unit_interval(args.tau, "--tau")
    _check_unit_interval(args.threshold, "--threshold")
    if args.oracle == "trace" and args.trace is None:
        raise UsageError("--oracle trace requires --trace PATH")
    if args.oracle == "synthetic" and args.trace is not None:
        raise UsageError("--trace is only valid with --oracle trace")
    if args.oracle == "trace" and args.preset is not None:
        raise UsageError("--preset is only valid with --oracle synthetic")
    req = DecodeRequest(
        oracle=args.oracle,
        preset=args.preset,
        decoder=args.decoder,
        tau=args.tau,
        threshold=args.threshold,
        gen_len=args.len,
        block_len=args.block,
        seed=args.seed,
        trace_text=_read_trace_file(args.trace) if args.trace else None,
        emit_trace=args.emit_trace is not None,
    )
    resp = run_decode(req)
    if args.emit_trace is not None and resp.trace_text is not None:
        Path(args.emit_trace).write_text(resp.trace_text)
    _write_or_print(json.dumps(resp.metrics, indent=2) + "\n", args.out)
    if args.out is not None:
        m = resp.metrics
        print(
            f"{m['decoder_kind']}: {m['tokens_committed']} tokens in "
            f"{m['forward_passes']} passes (tps_proxy {m['tps_proxy']:.3f})"
        )
    return EXIT_OK


def _cmd_replay(args: argparse.Namespace) -> int:
    _check_unit_interval(args.tau, "--tau")
    req = ReplayRequest(trace_text=_read_trace_file(args.trace), tau=args.tau)
    resp = run_replay(req)
    payload = resp.model_dump()
    _write_or_print(json.dumps(payload, indent=2) + "\n", args.out)
    if resp.agreement_rate is None:
        print(f"replayed {resp.records} records; no committed fields to check")
    else:
        print(
            f"replayed {resp.records} records; agreement "
            f"{100.0 * resp.agreement_rate:.2f}% ({resp.agreed}/{resp.applicable})"
        )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    taus = _parse_tau_spec(args.tau)
    for t in taus:
        _check_unit_interval(t, "--tau")
    _check_unit_interval(args.threshold, "--threshold")
    decoders = [d for d in args.decoder.split(",") if d]
    for d in decoders:
        if d not in ("clad", "vanilla", "threshold"):
            raise UsageError(f"unknown decoder {d!r}")
    blocks = _parse_int_list(args.block, "--block")
    lens = _parse_int_list(args.len, "--len")
    seeds = _parse_int_list(args.seed, "--seed")
    if not (decoders and taus and blocks and lens and seeds):
        raise UsageError("sweep grid is empty")
    req = SweepRequest(
        preset=args.preset or "easy-spans",
        decoders=decoders,
        taus=taus,
        block_lens=blocks,
        gen_lens=lens,
        seeds=seeds,
        threshold=args.threshold,
    )
    resp = run_sweep(req)
    _write_or_print(resp.csv, args.out)
    if args.out is not None:
        print(f"wrote {len(resp.rows)} sweep rows to {args.out}")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clad",
        description="Cluster-level attention-guided decoding engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    decode = sub.add_parser("decode", help="run one closed-loop decode")
    decode.add_argument("--oracle", choices=("synthetic", "trace"), default="synthetic")
    decode.add_argument("--preset", default=None, help="synthetic instance layout")
    decode.add_argument(
        "--decoder", choices=("clad", "vanilla", "threshold"), default="clad"
    )
    decode.add_argument("--tau", type=float, default=DEFAULT_TAU)
    decode.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    decode.add_argument("--len", type=int, default=None, help="generation length (default 256)")
    decode.add_argument("--block", type=int, default=None, help="block length (default 32)")
    decode.add_argument("--seed", type=int, default=0)
    decode.add_argument("--trace", default=None, help="trace file to replay as the oracle")
    decode.add_argument("--emit-trace", default=None, metavar="PATH")
    decode.add_argument("--out", default=None, metavar="PATH")
    decode.set_defaults(func=_cmd_decode)

    replay = sub.add_parser("replay", help="verify recorded decisions step by step")
    replay.add_argument("--trace", required=True)
    replay.add_argument("--tau", type=float, default=DEFAULT_TAU)
    replay.add_argument("--out", default=None, metavar="PATH")
    replay.set_defaults(func=_cmd_replay)

    sweep = sub.add_parser("sweep", help="grid of decode runs")
    sweep.add_argument("--preset", default=None)
    sweep.add_argument("--decoder", default="clad", help="comma list of decoders")
    sweep.add_argument("--tau", default=str(DEFAULT_TAU), help="single value or A:B:STEP")
    sweep.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    sweep.add_argument("--block", default="32", help="comma list of block lengths")
    sweep.add_argument("--len", default="256", help="comma list of generation lengths")
    sweep.add_argument("--seed", default="0", help="comma list of seeds")
    sweep.add_argument("--out", default=None, metavar="PATH")
    sweep.set_defaults(func=_cmd_sweep)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, GenerationError, PydanticValidationError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TraceParseError as exc:
        print(f"trace parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except CladError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
