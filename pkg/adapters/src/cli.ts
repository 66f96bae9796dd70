/**
 * Command-line entry points mirroring the toolkit's interchange formats.
 *
 *   export-embeddings --sentences doc.sent.jsonl --out doc.lemb
 *                     [--model hash] [--dim 128] [--max-merge 4] [--batch 64]
 *   export-posteriors --audio in.wav --vocab vocab.txt --out seg.lpost
 *                     [--model fbank-proj] [--hop-ms 40]
 *   export-vad        --audio in.wav --out segments.jsonl [--hop-ms 40]
 *
 * Every failure exits nonzero with a message on stderr.
 */

import { writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { bandFeatures, energyVad, loadVocab, projectToPosteriors, readWav } from "./audio.js";
import { exportEmbeddings } from "./embeddings.js";
import { makeEncoder } from "./encoders.js";
import { writePosteriors } from "./formats.js";

function usageError(msg: string): never {
  throw new Error(msg);
}

function run(argv: string[]): number {
  const [command, ...rest] = argv;
  if (!command) usageError("usage: <export-embeddings|export-posteriors|export-vad> ...");

  if (command === "export-embeddings") {
    const { values } = parseArgs({
      args: rest,
      options: {
        sentences: { type: "string" },
        out: { type: "string" },
        model: { type: "string", default: "hash" },
        dim: { type: "string", default: "128" },
        "max-merge": { type: "string", default: "4" },
        batch: { type: "string", default: "64" },
      },
    });
    if (!values.sentences || !values.out) usageError("export-embeddings needs --sentences and --out");
    const encoder = makeEncoder(values.model!, Number(values.dim));
    const res = exportEmbeddings(values.sentences, values.out, encoder, {
      maxMerge: Number(values["max-merge"]),
      batchSize: Number(values.batch),
    });
    console.error(`wrote ${res.nRows} rows (dim ${res.dim}) to ${values.out}`);
    return 0;
  }

  if (command === "export-posteriors") {
    const { values } = parseArgs({
      args: rest,
      options: {
        audio: { type: "string" },
        vocab: { type: "string" },
        out: { type: "string" },
        model: { type: "string", default: "fbank-proj" },
        "hop-ms": { type: "string", default: "40" },
      },
    });
    if (!values.audio || !values.vocab || !values.out) {
      usageError("export-posteriors needs --audio, --vocab and --out");
    }
    if (values.model !== "fbank-proj") {
      usageError(`acoustic model '${values.model}' is not available in this environment`);
    }
    const vocab = loadVocab(values.vocab);
    const wav = readWav(values.audio);
    const hopMs = Number(values["hop-ms"]);
    const feats = bandFeatures(wav, hopMs);
    if (feats.length === 0) usageError(`${values.audio}: audio shorter than one frame`);
    const rows = projectToPosteriors(feats, vocab.length);
    writePosteriors(values.out, hopMs, rows);
    console.error(`wrote ${rows.length} x ${vocab.length} posteriors at ${hopMs} ms hop to ${values.out}`);
    return 0;
  }

  if (command === "export-vad") {
    const { values } = parseArgs({
      args: rest,
      options: {
        audio: { type: "string" },
        out: { type: "string" },
        "hop-ms": { type: "string", default: "40" },
        "thresh-db": { type: "string", default: "-35" },
      },
    });
    if (!values.audio || !values.out) usageError("export-vad needs --audio and --out");
    const wav = readWav(values.audio);
    const segs = energyVad(wav, Number(values["hop-ms"]), Number(values["thresh-db"]));
    writeFileSync(values.out, segs.map((s) => JSON.stringify(s)).join("\n") + "\n", "utf-8");
    console.error(`wrote ${segs.length} segments to ${values.out}`);
    return 0;
  }

  usageError(`unknown command '${command}'`);
}

export function main(argv: string[]): number {
  try {
    return run(argv);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? "",
);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
