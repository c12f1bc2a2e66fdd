/**
 * Command line for checkpoint generation and trace export.
 *
 *   clad-export make-checkpoint --seed 7 --out checkpoint.json
 *   clad-export export --model checkpoint.json --len 8 --block 4 \
 *       --layers 4 --prompt-tokens 3,1,4,1 --out trace.jsonl
 */

import { readFileSync, writeFileSync } from "node:fs";
import { Checkpoint, ModelConfig, makeCheckpoint } from "./model.js";
import { ExportConfig, randomPrompt, runExport } from "./export.js";

interface Args {
  [key: string]: string;
}

function parseArgs(argv: string[]): { command: string; args: Args } {
  if (argv.length === 0) throw new UsageError("missing command");
  const command = argv[0];
  const args: Args = {};
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith("--") || i + 1 >= argv.length) {
      throw new UsageError(`malformed flag ${flag}`);
    }
    args[flag.slice(2)] = argv[i + 1];
  }
  return { command, args };
}

export class UsageError extends Error {}

function intArg(args: Args, name: string, fallback: number): number {
  if (!(name in args)) return fallback;
  const v = Number(args[name]);
  if (!Number.isInteger(v)) throw new UsageError(`--${name} expects an integer`);
  return v;
}

export function cmdMakeCheckpoint(args: Args): string {
  const config: ModelConfig = {
    vocabSize: intArg(args, "vocab", 48),
    dModel: intArg(args, "dim", 16),
    nLayers: intArg(args, "layers", 5),
    nHeads: intArg(args, "heads", 2),
    dFf: intArg(args, "ff", 32),
    maxLen: intArg(args, "max-len", 32),
    logitScale: 3.0,
  };
  if (config.dModel % config.nHeads !== 0) {
    throw new UsageError("--dim must be divisible by --heads");
  }
  const seed = intArg(args, "seed", 7);
  const ckpt = makeCheckpoint(config, seed);
  return JSON.stringify(ckpt);
}

export function cmdExport(args: Args): string {
  if (!args["model"]) throw new UsageError("--model PATH is required");
  const ckpt = JSON.parse(readFileSync(args["model"], "utf-8")) as Checkpoint;
  const genLen = intArg(args, "len", 8);
  const blockLen = intArg(args, "block", 8);
  const layers = intArg(args, "layers", 4);
  const seed = intArg(args, "seed", 0);
  let promptTokens: number[];
  if (args["prompt-tokens"]) {
    promptTokens = args["prompt-tokens"].split(",").map((t) => {
      const v = Number(t);
      if (!Number.isInteger(v)) throw new UsageError("--prompt-tokens expects integers");
      return v;
    });
  } else {
    promptTokens = randomPrompt(ckpt.config.vocabSize, intArg(args, "prompt-len", 4), seed);
  }
  const cfg: ExportConfig = {
    promptTokens,
    genLen,
    blockLen,
    layersToAverage: layers,
  };
  return runExport(ckpt, cfg);
}

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  const { command, args } = parsed;
  try {
    let output: string;
    if (command === "make-checkpoint") {
      output = cmdMakeCheckpoint(args);
    } else if (command === "export") {
      output = cmdExport(args);
    } else {
      console.error(`usage error: unknown command ${command}`);
      return 2;
    }
    if (args["out"]) {
      writeFileSync(args["out"], output);
      console.error(`wrote ${args["out"]}`);
    } else {
      process.stdout.write(output);
    }
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    console.error(`export error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
