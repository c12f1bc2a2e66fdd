import { execFileSync, spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { cmdExport, cmdMakeCheckpoint, main } from "../src/cli.js";
import { runExport } from "../src/export.js";
import { makeCheckpoint, type ModelConfig } from "../src/model.js";
import { validateTraceText } from "../src/trace.js";

const config: ModelConfig = {
  vocabSize: 24,
  dModel: 8,
  nLayers: 5,
  nHeads: 2,
  dFf: 16,
  maxLen: 16,
  logitScale: 3.0,
};

function exportText(genLen = 8, blockLen = 4, layers = 4): string {
  const ckpt = makeCheckpoint(config, 7);
  return runExport(ckpt, {
    promptTokens: [3, 1, 4, 1],
    genLen,
    blockLen,
    layersToAverage: layers,
  });
}

describe("runExport", () => {
  it("emits a header plus one record per committed token", () => {
    const text = exportText();
    const lines = text.trim().split("\n");
    expect(lines).toHaveLength(1 + 8); // top-1 loop: one record per token
    const header = JSON.parse(lines[0]);
    expect(header.format).toBe("clad-step-record");
    expect(header.version).toBe(1);
    expect(header.layers_averaged).toBe(4);
    expect(header.heads_averaged).toBe(config.nHeads);
    expect(header.attention_scope).toBe("block");
  });

  it("passes structural validation", () => {
    expect(() => validateTraceText(exportText())).not.toThrow();
  });

  it("is byte-identical across runs", () => {
    expect(exportText()).toBe(exportText());
  });

  it("starts fully masked and ends with one mask left", () => {
    const lines = exportText().trim().split("\n");
    const first = JSON.parse(lines[1]);
    expect(first.tokens.slice(4)).toEqual(new Array(8).fill(-1));
    const last = JSON.parse(lines[lines.length - 1]);
    expect(last.tokens.filter((t: number) => t === -1)).toHaveLength(1);
    expect(last.committed).toHaveLength(1);
  });

  it("rejects an out-of-range layer count", () => {
    expect(() => exportText(8, 4, config.nLayers + 1)).toThrow(/layer/);
  });

  it("rejects indivisible block lengths", () => {
    expect(() => exportText(10, 4)).toThrow(/multiple/);
  });
});

describe("cli", () => {
  it("round-trips checkpoint -> export deterministically", () => {
    const dir = mkdtempSync(join(tmpdir(), "clad-export-"));
    const ckptPath = join(dir, "ckpt.json");
    writeFileSync(ckptPath, cmdMakeCheckpoint({ seed: "7", vocab: "24", dim: "8" }));
    const args = { model: ckptPath, len: "8", block: "4", layers: "4", seed: "5" };
    const a = cmdExport(args);
    const b = cmdExport(args);
    expect(a).toBe(b);
    expect(() => validateTraceText(a)).not.toThrow();
  });

  it("returns usage errors for bad invocations", () => {
    expect(main(["export"])).toBe(2); // missing --model
    expect(main(["no-such-command"])).toBe(2);
  });
});

describe("end-to-end through the primary engine", () => {
  it("emitted traces replay cleanly via the decoder CLI", () => {
    const probe = spawnSync("python3", ["-c", "import clad"], { encoding: "utf-8" });
    if (probe.status !== 0) {
      console.warn("primary package not importable; skipping integration check");
      return;
    }
    const dir = mkdtempSync(join(tmpdir(), "clad-export-e2e-"));
    const tracePath = join(dir, "trace.jsonl");
    writeFileSync(tracePath, exportText());
    const out = execFileSync(
      "python3",
      ["-m", "clad.cli", "replay", "--trace", tracePath, "--tau", "0.75",
       "--out", join(dir, "decisions.json")],
      { encoding: "utf-8" },
    );
    expect(out).toMatch(/replayed 8 records/);
  });
});
