/**
 * Binary interchange formats consumed by the longalign toolkit.
 *
 * Posterior file: magic "LPOST1\n", ASCII header "V=<int> T=<int> HOP_MS=<int>\n",
 * then T x V float32 little-endian natural-log probabilities, row-major.
 * Embedding file: magic "LEMB1\n", header "N=<int> D=<int>\n", then N x D
 * float32 little-endian rows plus a sidecar JSONL index at <path>.idx.jsonl.
 */

import { writeFileSync, readFileSync } from "node:fs";

export interface EmbeddingIndexEntry {
  sent_id: string;
  merge_start: number;
  merge_len: number;
}

const POST_MAGIC = "LPOST1\n";
const EMB_MAGIC = "LEMB1\n";

function f32leBytes(rows: Float32Array[]): Buffer {
  const dim = rows.length ? rows[0].length : 0;
  const buf = Buffer.alloc(4 * rows.length * dim);
  let off = 0;
  for (const row of rows) {
    if (row.length !== dim) throw new Error("ragged rows");
    for (let i = 0; i < dim; i++) {
      buf.writeFloatLE(row[i], off);
      off += 4;
    }
  }
  return buf;
}

export function writePosteriors(path: string, hopMs: number, logp: Float32Array[]): void {
  if (logp.length < 1) throw new Error("posterior matrix needs T >= 1");
  const v = logp[0].length;
  const header = Buffer.from(`${POST_MAGIC}V=${v} T=${logp.length} HOP_MS=${hopMs}\n`, "ascii");
  writeFileSync(path, Buffer.concat([header, f32leBytes(logp)]));
}

export function writeEmbeddings(path: string, rows: Float32Array[], index: EmbeddingIndexEntry[]): void {
  if (rows.length < 1) throw new Error("embedding file needs N >= 1");
  if (rows.length !== index.length) throw new Error("index length does not match row count");
  const d = rows[0].length;
  const header = Buffer.from(`${EMB_MAGIC}N=${rows.length} D=${d}\n`, "ascii");
  writeFileSync(path, Buffer.concat([header, f32leBytes(rows)]));
  const sidecar = index.map((e) => JSON.stringify(e)).join("\n") + "\n";
  writeFileSync(path + ".idx.jsonl", sidecar, "utf-8");
}

/** Self-check reader mirroring the toolkit's parser; used by tests. */
export function readPosteriors(path: string): { hopMs: number; rows: Float32Array[] } {
  const data = readFileSync(path);
  const magic = data.subarray(0, POST_MAGIC.length).toString("ascii");
  if (magic !== POST_MAGIC) throw new Error(`bad magic ${JSON.stringify(magic)}`);
  const nl = data.indexOf(0x0a, POST_MAGIC.length);
  const header = data.subarray(POST_MAGIC.length, nl).toString("ascii");
  const fields = new Map(header.split(" ").map((kv) => kv.split("=") as [string, string]));
  const v = Number(fields.get("V"));
  const t = Number(fields.get("T"));
  const hopMs = Number(fields.get("HOP_MS"));
  const rows: Float32Array[] = [];
  let off = nl + 1;
  for (let i = 0; i < t; i++) {
    const row = new Float32Array(v);
    for (let j = 0; j < v; j++) {
      row[j] = data.readFloatLE(off);
      off += 4;
    }
    rows.push(row);
  }
  return { hopMs, rows };
}

export function logsumexp(row: Float32Array | Float64Array): number {
  let m = -Infinity;
  for (const x of row) if (x > m) m = x;
  if (m === -Infinity) return -Infinity;
  let s = 0;
  for (const x of row) s += Math.exp(x - m);
  return m + Math.log(s);
}
