/**
 * Tiny bidirectional transformer denoiser with attention capture.
 *
 * Small enough to run a forward pass in plain arrays, but structurally a
 * real masked-LM: token + position embeddings, pre-norm attention and
 * feed-forward blocks, per-head attention maps and a vocabulary head.
 * The mask symbol has its own embedding row (index vocabSize).
 */

import { Rng } from "./rng.js";

export const MASK = -1;

export interface ModelConfig {
  vocabSize: number;
  dModel: number;
  nLayers: number;
  nHeads: number;
  dFf: number;
  maxLen: number;
  /** Sharpens the output softmax so the toy model expresses confidence. */
  logitScale: number;
}

export interface Checkpoint {
  config: ModelConfig;
  weights: Record<string, number[][]>;
}

export interface ForwardResult {
  /** Greedy token per position (argmax, ties to the lowest id). */
  greedy: number[];
  /** Probability of the greedy token per position. */
  confidence: number[];
  /** Per-layer attention averaged over heads: [layer][q][k]. */
  layerAttention: number[][][];
}

function zeros(rows: number, cols: number): number[][] {
  return Array.from({ length: rows }, () => new Array<number>(cols).fill(0));
}

function randomMatrix(rng: Rng, rows: number, cols: number, std: number): number[][] {
  return Array.from({ length: rows }, () =>
    Array.from({ length: cols }, () => rng.normal(0, std)),
  );
}

function matmul(a: number[][], b: number[][]): number[][] {
  const n = a.length;
  const k = b.length;
  const m = b[0].length;
  const out = zeros(n, m);
  for (let i = 0; i < n; i++) {
    for (let t = 0; t < k; t++) {
      const av = a[i][t];
      if (av === 0) continue;
      for (let j = 0; j < m; j++) out[i][j] += av * b[t][j];
    }
  }
  return out;
}

function layerNorm(h: number[][], gamma: number[], beta: number[]): number[][] {
  const d = gamma.length;
  return h.map((row) => {
    let mean = 0;
    for (const x of row) mean += x;
    mean /= d;
    let variance = 0;
    for (const x of row) variance += (x - mean) * (x - mean);
    variance /= d;
    const inv = 1 / Math.sqrt(variance + 1e-5);
    return row.map((x, j) => gamma[j] * (x - mean) * inv + beta[j]);
  });
}

function softmaxRow(row: number[]): number[] {
  const max = Math.max(...row);
  const exps = row.map((x) => Math.exp(x - max));
  const sum = exps.reduce((a, b) => a + b, 0);
  return exps.map((e) => e / sum);
}

const LAYER_PARAMS = ["wq", "wk", "wv", "wo", "w1", "w2", "ln1g", "ln1b", "ln2g", "ln2b"] as const;

export function makeCheckpoint(config: ModelConfig, seed: number): Checkpoint {
  const rng = new Rng(seed);
  const { vocabSize, dModel, nLayers, dFf, maxLen } = config;
  const weights: Record<string, number[][]> = {};
  weights["embed"] = randomMatrix(rng, vocabSize + 1, dModel, 0.8);
  weights["pos"] = randomMatrix(rng, maxLen, dModel, 0.4);
  const projStd = 0.6 / Math.sqrt(dModel);
  for (let l = 0; l < nLayers; l++) {
    weights[`l${l}.wq`] = randomMatrix(rng, dModel, dModel, projStd);
    weights[`l${l}.wk`] = randomMatrix(rng, dModel, dModel, projStd);
    weights[`l${l}.wv`] = randomMatrix(rng, dModel, dModel, projStd);
    weights[`l${l}.wo`] = randomMatrix(rng, dModel, dModel, projStd);
    weights[`l${l}.w1`] = randomMatrix(rng, dModel, dFf, projStd);
    weights[`l${l}.w2`] = randomMatrix(rng, dFf, dModel, projStd);
    weights[`l${l}.ln1g`] = [new Array(dModel).fill(1)];
    weights[`l${l}.ln1b`] = [new Array(dModel).fill(0)];
    weights[`l${l}.ln2g`] = [new Array(dModel).fill(1)];
    weights[`l${l}.ln2b`] = [new Array(dModel).fill(0)];
  }
  weights["lnfg"] = [new Array(dModel).fill(1)];
  weights["lnfb"] = [new Array(dModel).fill(0)];
  weights["out"] = randomMatrix(rng, dModel, vocabSize, 0.6 / Math.sqrt(dModel));
  return { config, weights };
}

export function validateCheckpoint(ckpt: Checkpoint): void {
  const { vocabSize, dModel, nLayers, nHeads, dFf, maxLen } = ckpt.config;
  if (vocabSize < 2 || dModel < 2 || nLayers < 1 || nHeads < 1 || maxLen < 1) {
    throw new Error("checkpoint config has non-positive dimensions");
  }
  if (dModel % nHeads !== 0) {
    throw new Error(`dModel ${dModel} is not divisible by nHeads ${nHeads}`);
  }
  const expect = (name: string, rows: number, cols: number) => {
    const w = ckpt.weights[name];
    if (!w || w.length !== rows || w[0].length !== cols) {
      throw new Error(`weight ${name} missing or misshaped (want ${rows}x${cols})`);
    }
  };
  expect("embed", vocabSize + 1, dModel);
  expect("pos", maxLen, dModel);
  expect("out", dModel, vocabSize);
  for (let l = 0; l < nLayers; l++) {
    for (const p of LAYER_PARAMS) {
      if (!ckpt.weights[`l${l}.${p}`]) throw new Error(`missing weight l${l}.${p}`);
    }
    expect(`l${l}.w1`, dModel, dFf);
    expect(`l${l}.w2`, dFf, dModel);
  }
}

export function forward(ckpt: Checkpoint, tokens: number[]): ForwardResult {
  const { vocabSize, dModel, nLayers, nHeads, maxLen, logitScale } = ckpt.config;
  const L = tokens.length;
  if (L > maxLen) throw new Error(`sequence length ${L} exceeds maxLen ${maxLen}`);
  const w = ckpt.weights;
  const dk = dModel / nHeads;

  let h = tokens.map((tok, p) => {
    const row = tok === MASK ? vocabSize : tok;
    if (row < 0 || row > vocabSize) throw new Error(`token id ${tok} out of range`);
    return w["embed"][row].map((x, j) => x + w["pos"][p][j]);
  });

  const layerAttention: number[][][] = [];
  for (let l = 0; l < nLayers; l++) {
    const normed = layerNorm(h, w[`l${l}.ln1g`][0], w[`l${l}.ln1b`][0]);
    const q = matmul(normed, w[`l${l}.wq`]);
    const k = matmul(normed, w[`l${l}.wk`]);
    const v = matmul(normed, w[`l${l}.wv`]);
    const headAvg = zeros(L, L);
    const context = zeros(L, dModel);
    for (let head = 0; head < nHeads; head++) {
      const off = head * dk;
      for (let i = 0; i < L; i++) {
        const scores = new Array<number>(L);
        for (let j = 0; j < L; j++) {
          let dot = 0;
          for (let t = 0; t < dk; t++) dot += q[i][off + t] * k[j][off + t];
          scores[j] = dot / Math.sqrt(dk);
        }
        const probs = softmaxRow(scores);
        for (let j = 0; j < L; j++) {
          headAvg[i][j] += probs[j] / nHeads;
          for (let t = 0; t < dk; t++) context[i][off + t] += probs[j] * v[j][off + t];
        }
      }
    }
    layerAttention.push(headAvg);
    const attnOut = matmul(context, w[`l${l}.wo`]);
    h = h.map((row, i) => row.map((x, j) => x + attnOut[i][j]));

    const normed2 = layerNorm(h, w[`l${l}.ln2g`][0], w[`l${l}.ln2b`][0]);
    const hidden = matmul(normed2, w[`l${l}.w1`]).map((row) =>
      row.map((x) => (x > 0 ? x : 0)),
    );
    const ffOut = matmul(hidden, w[`l${l}.w2`]);
    h = h.map((row, i) => row.map((x, j) => x + ffOut[i][j]));
  }

  const final = layerNorm(h, w["lnfg"][0], w["lnfb"][0]);
  const logits = matmul(final, w["out"]);
  const greedy: number[] = [];
  const confidence: number[] = [];
  for (let p = 0; p < L; p++) {
    const probs = softmaxRow(logits[p].map((x) => x * logitScale));
    let best = 0;
    for (let t = 1; t < probs.length; t++) {
      if (probs[t] > probs[best]) best = t; // strict: ties keep the lowest id
    }
    greedy.push(best);
    confidence.push(probs[best]);
  }
  return { greedy, confidence, layerAttention };
}

/**
 * Average attention over all heads of the last `layers` transformer
 * layers (head averaging already happened per layer).
 */
export function averagedAttention(result: ForwardResult, layers: number): number[][] {
  const total = result.layerAttention.length;
  if (layers < 1 || layers > total) {
    throw new Error(`cannot average last ${layers} layers of a ${total}-layer model`);
  }
  const L = result.layerAttention[0].length;
  const out = zeros(L, L);
  for (let l = total - layers; l < total; l++) {
    const a = result.layerAttention[l];
    for (let i = 0; i < L; i++) {
      for (let j = 0; j < L; j++) out[i][j] += a[i][j] / layers;
    }
  }
  return out;
}
