/**
 * Writer and validator for the clad step-record trace format.
 *
 * Line-delimited JSON: one header object, then one object per step.
 * JSON.stringify emits shortest round-trip doubles, which is exactly
 * what the consuming engine requires for bit-exact replay.
 */

export const TRACE_FORMAT = "clad-step-record";
export const TRACE_VERSION = 1;
export const MASK = -1;

export interface TraceHeader {
  seq_len: number;
  prompt_len: number;
  block_len: number;
  attention_scope: "block";
  layers_averaged: number;
  heads_averaged: number;
}

export interface TraceStep {
  step: number;
  block_start: number;
  /** Full window before this step's commit; MASK = -1. */
  tokens: number[];
  greedy: number[];
  confidence: number[];
  /** Block-local attention, row-major. */
  attention: number[];
  committed?: number[];
}

export function renderTrace(header: TraceHeader, steps: TraceStep[]): string {
  const lines = [
    JSON.stringify({
      format: TRACE_FORMAT,
      version: TRACE_VERSION,
      seq_len: header.seq_len,
      prompt_len: header.prompt_len,
      block_len: header.block_len,
      attention_scope: header.attention_scope,
      layers_averaged: header.layers_averaged,
      heads_averaged: header.heads_averaged,
    }),
  ];
  for (const s of steps) {
    const obj: Record<string, unknown> = {
      step: s.step,
      block_start: s.block_start,
      tokens: s.tokens,
      greedy: s.greedy,
      confidence: s.confidence,
      attention: s.attention,
    };
    if (s.committed !== undefined) obj["committed"] = s.committed;
    lines.push(JSON.stringify(obj));
  }
  return lines.join("\n") + "\n";
}

/** Structural validation mirroring the consuming engine's reader. */
export function validateTraceText(text: string): void {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length === 0) throw new Error("empty trace");
  const header = JSON.parse(lines[0]) as Record<string, unknown>;
  if (header["format"] !== TRACE_FORMAT) throw new Error("bad format field");
  if (header["version"] !== TRACE_VERSION) throw new Error("bad version field");
  const seqLen = header["seq_len"] as number;
  const promptLen = header["prompt_len"] as number;
  const blockLen = header["block_len"] as number;
  if ((seqLen - promptLen) % blockLen !== 0) {
    throw new Error("generation region is not a whole number of blocks");
  }
  for (let n = 1; n < lines.length; n++) {
    const rec = JSON.parse(lines[n]) as Record<string, unknown>;
    const tokens = rec["tokens"] as number[];
    const greedy = rec["greedy"] as number[];
    const confidence = rec["confidence"] as number[];
    const attention = rec["attention"] as number[];
    if (tokens.length !== seqLen) throw new Error(`line ${n + 1}: tokens length`);
    if (greedy.length !== blockLen) throw new Error(`line ${n + 1}: greedy length`);
    if (confidence.length !== blockLen) throw new Error(`line ${n + 1}: confidence length`);
    if (attention.length !== blockLen * blockLen) {
      throw new Error(`line ${n + 1}: attention length`);
    }
    for (const c of confidence) {
      if (!(c >= 0 && c <= 1)) throw new Error(`line ${n + 1}: confidence ${c} out of range`);
    }
    for (const a of attention) {
      if (!Number.isFinite(a) || a < 0) throw new Error(`line ${n + 1}: bad attention entry`);
    }
    const blockStart = rec["block_start"] as number;
    const masked = new Set<number>();
    for (let p = blockStart; p < blockStart + blockLen; p++) {
      if (tokens[p] === MASK) masked.add(p);
    }
    const committed = rec["committed"] as number[] | undefined;
    if (committed !== undefined) {
      for (const p of committed) {
        if (!masked.has(p)) throw new Error(`line ${n + 1}: committed ${p} not masked`);
      }
    }
  }
}
