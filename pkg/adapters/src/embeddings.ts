/**
 * Sentence-embedding export: N single rows plus merged-span overlap rows.
 *
 * Input is the toolkit's sentence JSONL ({sent_id, text} per line); output
 * is an LEMB1 file whose sidecar index maps every row to its
 * (merge_start, merge_len) span. Overlap rows let the bitext aligner score
 * 1-many and many-1 merges without re-running the encoder.
 */

import { readFileSync } from "node:fs";

import { SentenceEncoder } from "./encoders.js";
import { EmbeddingIndexEntry, writeEmbeddings } from "./formats.js";

export interface EmbeddingExportConfig {
  maxMerge: number;
  batchSize: number;
}

export interface SentenceRow {
  sent_id: string;
  text: string;
}

export function readSentenceFile(path: string): SentenceRow[] {
  const rows: SentenceRow[] = [];
  for (const line of readFileSync(path, "utf-8").split("\n")) {
    if (!line.trim()) continue;
    const d = JSON.parse(line);
    rows.push({ sent_id: String(d.sent_id), text: String(d.text) });
  }
  return rows;
}

export function spanTexts(
  sentences: SentenceRow[], maxMerge: number,
): { texts: string[]; index: EmbeddingIndexEntry[] } {
  const texts: string[] = [];
  const index: EmbeddingIndexEntry[] = [];
  for (let len = 1; len <= maxMerge; len++) {
    for (let start = 0; start + len <= sentences.length; start++) {
      texts.push(sentences.slice(start, start + len).map((s) => s.text).join(""));
      index.push({ sent_id: sentences[start].sent_id, merge_start: start, merge_len: len });
    }
  }
  return { texts, index };
}

export function exportEmbeddings(
  sentencesFile: string, outPath: string, encoder: SentenceEncoder, config: EmbeddingExportConfig,
): { nRows: number; dim: number } {
  if (config.maxMerge < 1) throw new Error("max_merge must be >= 1");
  const sentences = readSentenceFile(sentencesFile);
  if (sentences.length === 0) throw new Error(`${sentencesFile}: no sentences to embed`);
  const { texts, index } = spanTexts(sentences, config.maxMerge);
  const rows: Float32Array[] = [];
  for (let i = 0; i < texts.length; i += config.batchSize) {
    rows.push(...encoder.encode(texts.slice(i, i + config.batchSize)));
  }
  writeEmbeddings(outPath, rows, index);
  return { nRows: rows.length, dim: encoder.dim };
}
