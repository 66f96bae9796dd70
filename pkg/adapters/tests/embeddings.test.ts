import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { exportEmbeddings, spanTexts } from "../src/embeddings";
import { HashEncoder, makeEncoder } from "../src/encoders";
import { main } from "../src/cli";

function sentenceFile(dir: string, texts: string[]): string {
  const path = join(dir, "sent.jsonl");
  writeFileSync(
    path,
    texts.map((t, i) => JSON.stringify({ sent_id: `s${i}`, text: t })).join("\n") + "\n",
  );
  return path;
}

describe("span enumeration", () => {
  it("3 sentences with max_merge 2 yield 3 singles + 2 pairs", () => {
    const rows = [0, 1, 2].map((i) => ({ sent_id: `s${i}`, text: `t${i}` }));
    const { texts, index } = spanTexts(rows, 2);
    expect(texts).toHaveLength(5);
    expect(index.filter((e) => e.merge_len === 1)).toHaveLength(3);
    expect(index.filter((e) => e.merge_len === 2)).toHaveLength(2);
    expect(index[3]).toEqual({ sent_id: "s0", merge_start: 0, merge_len: 2 });
  });
});

describe("hash encoder", () => {
  it("produces unit-norm deterministic vectors", () => {
    const enc = new HashEncoder(64);
    const [a1] = enc.encode(["今日會議"]);
    const [a2] = enc.encode(["今日會議"]);
    const [b] = enc.encode(["完全不同"]);
    expect(Array.from(a1)).toEqual(Array.from(a2));
    const norm = Math.hypot(...a1);
    expect(Math.abs(norm - 1)).toBeLessThan(1e-4);
    const dot = a1.reduce((acc, x, i) => acc + x * b[i], 0);
    expect(Math.abs(dot)).toBeLessThan(0.9);
  });

  it("unknown models fail loudly", () => {
    expect(() => makeEncoder("mega-encoder-v9", 64)).toThrow(/not available/);
  });
});

describe("export", () => {
  it("writes singles plus overlaps and records dims", () => {
    const dir = mkdtempSync(join(tmpdir(), "la-emb-"));
    const sentences = sentenceFile(dir, ["甲。", "乙！", "丙？"]);
    const out = join(dir, "doc.lemb");
    const res = exportEmbeddings(sentences, out, new HashEncoder(32), { maxMerge: 2, batchSize: 2 });
    expect(res).toEqual({ nRows: 5, dim: 32 });
  });

  it("empty sentence lists exit nonzero through the CLI", () => {
    const dir = mkdtempSync(join(tmpdir(), "la-emb-"));
    const sentences = sentenceFile(dir, []);
    const code = main(["export-embeddings", "--sentences", sentences, "--out", join(dir, "x.lemb")]);
    expect(code).toBe(1);
  });

  it("unknown model exits nonzero through the CLI", () => {
    const dir = mkdtempSync(join(tmpdir(), "la-emb-"));
    const sentences = sentenceFile(dir, ["甲。"]);
    const code = main([
      "export-embeddings", "--sentences", sentences,
      "--out", join(dir, "x.lemb"), "--model", "nonexistent",
    ]);
    expect(code).toBe(1);
  });
});
