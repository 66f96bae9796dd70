/**
 * Sentence encoders behind a common interface.
 *
 * The default "hash" backend is a deterministic character n-gram feature
 * hasher with L2 normalization: no model weights, no network, identical
 * output everywhere. Pretrained-model backends plug in behind the same
 * interface; requesting one that cannot be loaded must fail loudly so the
 * exporting script exits nonzero with a message.
 */

export interface SentenceEncoder {
  readonly dim: number;
  encode(texts: string[]): Float32Array[];
}

/** FNV-1a, 32-bit. */
function fnv1a(s: string, seed = 0x811c9dc5): number {
  let h = seed >>> 0;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

export class HashEncoder implements SentenceEncoder {
  readonly dim: number;
  private readonly ngramMax: number;

  constructor(dim = 128, ngramMax = 3) {
    if (dim < 2) throw new Error("dim must be >= 2");
    this.dim = dim;
    this.ngramMax = ngramMax;
  }

  encode(texts: string[]): Float32Array[] {
    return texts.map((t) => this.encodeOne(t));
  }

  private encodeOne(text: string): Float32Array {
    const v = new Float32Array(this.dim);
    const chars = Array.from(text);
    for (let n = 1; n <= this.ngramMax; n++) {
      for (let i = 0; i + n <= chars.length; i++) {
        const gram = chars.slice(i, i + n).join("");
        const h = fnv1a(gram, 0x811c9dc5 + n);
        const bucket = h % this.dim;
        const sign = (h >>> 16) & 1 ? 1 : -1;
        v[bucket] += sign;
      }
    }
    let norm = Math.hypot(...v);
    if (norm === 0) {
      // degenerate (empty text): deterministic unit vector
      v[fnv1a(text) % this.dim] = 1;
      norm = 1;
    }
    for (let i = 0; i < this.dim; i++) v[i] /= norm;
    return v;
  }
}

export function makeEncoder(model: string, dim: number): SentenceEncoder {
  if (model === "hash") return new HashEncoder(dim);
  // pretrained backends would be registered here; anything else is a load failure
  throw new Error(`embedding model '${model}' is not available in this environment`);
}
