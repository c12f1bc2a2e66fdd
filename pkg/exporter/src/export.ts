/**
 * Decode with the toy runtime and record every step as a trace.
 *
 * The exporter never makes scheduling decisions of its own design: the
 * runtime's plain top-1 loop commits one position per step, and what is
 * recorded per step is exactly what a scheduler would have seen (the
 * pre-commit window, greedy tokens, confidences, and attention averaged
 * over all heads of the last N layers, block-sliced).
 */

import { Rng } from "./rng.js";
import {
  Checkpoint,
  MASK,
  averagedAttention,
  forward,
  validateCheckpoint,
} from "./model.js";
import { TraceHeader, TraceStep, renderTrace } from "./trace.js";

export interface ExportConfig {
  promptTokens: number[];
  genLen: number;
  blockLen: number;
  /** Trailing transformer layers whose head-averaged maps are averaged. */
  layersToAverage: number;
}

export function runExport(ckpt: Checkpoint, cfg: ExportConfig): string {
  validateCheckpoint(ckpt);
  const { promptTokens, genLen, blockLen, layersToAverage } = cfg;
  if (genLen <= 0 || blockLen <= 0 || genLen % blockLen !== 0) {
    throw new Error(`gen length ${genLen} is not a positive multiple of block ${blockLen}`);
  }
  if (layersToAverage < 1 || layersToAverage > ckpt.config.nLayers) {
    throw new Error(
      `layer range out of range: cannot average last ${layersToAverage} of ` +
        `${ckpt.config.nLayers} layers`,
    );
  }
  const seqLen = promptTokens.length + genLen;
  if (seqLen > ckpt.config.maxLen) {
    throw new Error(`window ${seqLen} exceeds model maxLen ${ckpt.config.maxLen}`);
  }
  for (const tok of promptTokens) {
    if (tok < 0 || tok >= ckpt.config.vocabSize) {
      throw new Error(`prompt token ${tok} outside the vocabulary`);
    }
  }

  const tokens: number[] = [...promptTokens, ...new Array<number>(genLen).fill(MASK)];
  const header: TraceHeader = {
    seq_len: seqLen,
    prompt_len: promptTokens.length,
    block_len: blockLen,
    attention_scope: "block",
    layers_averaged: layersToAverage,
    heads_averaged: ckpt.config.nHeads,
  };

  const steps: TraceStep[] = [];
  let step = 0;
  const numBlocks = genLen / blockLen;
  for (let b = 0; b < numBlocks; b++) {
    const blockStart = promptTokens.length + b * blockLen;
    for (;;) {
      const masked: number[] = [];
      for (let p = blockStart; p < blockStart + blockLen; p++) {
        if (tokens[p] === MASK) masked.push(p);
      }
      if (masked.length === 0) break;

      const result = forward(ckpt, tokens);
      const attention = averagedAttention(result, layersToAverage);

      // runtime's own rule: commit the most confident masked position
      let best = masked[0];
      for (const p of masked) {
        if (result.confidence[p] > result.confidence[best]) best = p;
      }

      const blockSlice: number[] = [];
      for (let i = blockStart; i < blockStart + blockLen; i++) {
        for (let j = blockStart; j < blockStart + blockLen; j++) {
          blockSlice.push(attention[i][j]);
        }
      }
      steps.push({
        step,
        block_start: blockStart,
        tokens: [...tokens],
        greedy: result.greedy.slice(blockStart, blockStart + blockLen),
        confidence: result.confidence.slice(blockStart, blockStart + blockLen),
        attention: blockSlice,
        committed: [best],
      });
      tokens[best] = result.greedy[best];
      step += 1;
    }
  }
  return renderTrace(header, steps);
}

export function randomPrompt(vocabSize: number, length: number, seed: number): number[] {
  const rng = new Rng(seed);
  return Array.from({ length }, () => rng.int(0, vocabSize));
}
