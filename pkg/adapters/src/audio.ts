/**
 * Minimal WAV ingestion and deterministic frame-level token posteriors.
 *
 * The "fbank-proj" backend frames the signal, measures log band energies
 * (Goertzel filters at log-spaced frequencies), projects them onto the
 * vocabulary through a hash-seeded matrix, and log-softmaxes each frame.
 * It is an offline stand-in with the exact output contract of an acoustic
 * model export: normalized rows, hop carried in the header.
 */

import { readFileSync } from "node:fs";

export interface WavData {
  sampleRate: number;
  samples: Float32Array; // mono, [-1, 1]
}

export function readWav(path: string): WavData {
  const buf = readFileSync(path);
  if (buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${path}: not a RIFF/WAVE file`);
  }
  let off = 12;
  let fmt: { channels: number; sampleRate: number; bits: number } | null = null;
  let data: Buffer | null = null;
  while (off + 8 <= buf.length) {
    const id = buf.toString("ascii", off, off + 4);
    const size = buf.readUInt32LE(off + 4);
    const body = buf.subarray(off + 8, off + 8 + size);
    if (id === "fmt ") {
      const codec = body.readUInt16LE(0);
      if (codec !== 1 && codec !== 0xfffe) throw new Error(`${path}: only PCM wav supported`);
      fmt = {
        channels: body.readUInt16LE(2),
        sampleRate: body.readUInt32LE(4),
        bits: body.readUInt16LE(14),
      };
    } else if (id === "data") {
      data = body;
    }
    off += 8 + size + (size & 1);
  }
  if (!fmt || !data) throw new Error(`${path}: missing fmt/data chunk`);
  if (fmt.bits !== 16) throw new Error(`${path}: only 16-bit PCM supported`);
  const frames = Math.floor(data.length / 2 / fmt.channels);
  const mono = new Float32Array(frames);
  for (let i = 0; i < frames; i++) {
    let acc = 0;
    for (let c = 0; c < fmt.channels; c++) acc += data.readInt16LE(2 * (i * fmt.channels + c));
    mono[i] = acc / fmt.channels / 32768;
  }
  return { sampleRate: fmt.sampleRate, samples: mono };
}

function goertzelPower(frame: Float32Array, freq: number, rate: number): number {
  const w = (2 * Math.PI * freq) / rate;
  const coeff = 2 * Math.cos(w);
  let s0 = 0, s1 = 0, s2 = 0;
  for (let i = 0; i < frame.length; i++) {
    s0 = frame[i] + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  return s1 * s1 + s2 * s2 - coeff * s1 * s2;
}

export function bandFeatures(
  wav: WavData, hopMs: number, winMs = 25, nBands = 20,
): Float32Array[] {
  const hop = Math.max(1, Math.round((wav.sampleRate * hopMs) / 1000));
  const win = Math.max(hop, Math.round((wav.sampleRate * winMs) / 1000));
  const fMin = 80;
  const fMax = Math.min(7600, wav.sampleRate / 2 - 100);
  const freqs = Array.from({ length: nBands }, (_, b) =>
    fMin * Math.pow(fMax / fMin, b / (nBands - 1)));
  const out: Float32Array[] = [];
  for (let start = 0; start + 1 <= wav.samples.length; start += hop) {
    const frame = wav.samples.subarray(start, Math.min(start + win, wav.samples.length));
    const feats = new Float32Array(nBands);
    for (let b = 0; b < nBands; b++) {
      feats[b] = Math.log(goertzelPower(frame as Float32Array, freqs[b], wav.sampleRate) + 1e-9);
    }
    out.push(feats);
    if (start + hop >= wav.samples.length) break;
  }
  return out;
}

function mix32(x: number): number {
  x = Math.imul(x ^ (x >>> 16), 0x45d9f3b) >>> 0;
  x = Math.imul(x ^ (x >>> 16), 0x45d9f3b) >>> 0;
  return (x ^ (x >>> 16)) >>> 0;
}

/** Deterministic projection weight for (token index, band). */
function weight(tokenIdx: number, band: number): number {
  const h = mix32(tokenIdx * 2654435761 + band * 40503 + 17);
  return (h / 0xffffffff) * 2 - 1;
}

export function projectToPosteriors(feats: Float32Array[], vocabSize: number): Float32Array[] {
  const rows: Float32Array[] = [];
  for (const f of feats) {
    const logits = new Float64Array(vocabSize);
    for (let v = 0; v < vocabSize; v++) {
      let acc = 0;
      for (let b = 0; b < f.length; b++) acc += weight(v, b) * f[b];
      logits[v] = acc / Math.sqrt(f.length);
    }
    // log-softmax in double precision, stored as float32
    let m = -Infinity;
    for (const x of logits) if (x > m) m = x;
    let s = 0;
    for (const x of logits) s += Math.exp(x - m);
    const logZ = m + Math.log(s);
    const row = new Float32Array(vocabSize);
    for (let v = 0; v < vocabSize; v++) row[v] = logits[v] - logZ;
    rows.push(row);
  }
  return rows;
}

export function loadVocab(path: string): string[] {
  const lines = readFileSync(path, "utf-8").split("\n");
  while (lines.length && lines[lines.length - 1] === "") lines.pop();
  if (lines.length < 2 || lines[0] !== "<blk>" || lines[1] !== "<unk>") {
    throw new Error(`${path}: vocab must start with <blk>, <unk> (tokenizer/vocab mismatch)`);
  }
  return lines;
}

export interface VadSegment {
  seg_id: string;
  start_s: number;
  end_s: number;
  start_frame: number;
  end_frame: number;
}

/** Energy-threshold VAD over framed audio; merges gaps below minGapMs. */
export function energyVad(
  wav: WavData, hopMs: number, threshDb = -35, minSpeechMs = 200, minGapMs = 300,
): VadSegment[] {
  const hop = Math.max(1, Math.round((wav.sampleRate * hopMs) / 1000));
  const energies: number[] = [];
  for (let start = 0; start + hop <= wav.samples.length; start += hop) {
    let acc = 0;
    for (let i = start; i < start + hop; i++) acc += wav.samples[i] * wav.samples[i];
    energies.push(10 * Math.log10(acc / hop + 1e-12));
  }
  const active = energies.map((e) => e > threshDb);
  const minSpeech = Math.max(1, Math.round(minSpeechMs / hopMs));
  const minGap = Math.max(1, Math.round(minGapMs / hopMs));
  const spans: Array<[number, number]> = [];
  let s = -1;
  for (let t = 0; t <= active.length; t++) {
    const on = t < active.length && active[t];
    if (on && s < 0) s = t;
    if (!on && s >= 0) {
      spans.push([s, t]);
      s = -1;
    }
  }
  const merged: Array<[number, number]> = [];
  for (const span of spans) {
    const last = merged[merged.length - 1];
    if (last && span[0] - last[1] < minGap) last[1] = span[1];
    else merged.push([...span] as [number, number]);
  }
  return merged
    .filter(([a, b]) => b - a >= minSpeech)
    .map(([a, b], k) => ({
      seg_id: `seg_${String(k).padStart(3, "0")}`,
      start_s: (a * hopMs) / 1000,
      end_s: (b * hopMs) / 1000,
      start_frame: a,
      end_frame: b,
    }));
}
