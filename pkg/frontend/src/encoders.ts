/**
 * Text encoders behind a single interface.
 *
 * `hashed:<dim>` is a dependency-free feature-hashing encoder: unigram and
 * bigram tokens are FNV-1a hashed into signed buckets. It is deterministic
 * across runs and platforms, which makes exports reproducible byte for byte,
 * and it needs no model download, so it is the backend the test suite runs.
 *
 * Any other name is treated as a transformer model id and resolved through
 * @xenova/transformers if that package is installed (mean pooling). Weights
 * are fetched by that library on first use.
 */

export class ModelUnavailableError extends Error {
  readonly code = "model-unavailable";
  constructor(message: string) {
    super(message);
    this.name = "ModelUnavailableError";
  }
}

/** Per-item encode failure; the exporter records these and keeps going. */
export class EncodeError extends Error {
  readonly code = "encode-failure";
  constructor(message: string) {
    super(message);
    this.name = "EncodeError";
  }
}

export interface Encoder {
  readonly name: string;
  readonly dim: number;
  /** Encode a batch; rows come back in input order. */
  encode(texts: string[]): Promise<Float32Array[]>;
}

const FNV_OFFSET = 0x811c9dc5;
const FNV_PRIME = 0x01000193;

function fnv1a(text: string, seed: number): number {
  let h = (FNV_OFFSET ^ seed) >>> 0;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, FNV_PRIME) >>> 0;
  }
  return h >>> 0;
}

function tokenize(text: string): string[] {
  const unigrams = text.toLowerCase().split(/[^a-z0-9]+/).filter(Boolean);
  const features = unigrams.slice();
  for (let i = 0; i + 1 < unigrams.length; i++) {
    features.push(`${unigrams[i]} ${unigrams[i + 1]}`);
  }
  return features;
}

export class HashedEncoder implements Encoder {
  readonly name: string;

  constructor(readonly dim: number, readonly normalize: boolean = true) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new ModelUnavailableError(`hashed encoder dim must be a positive integer, got ${dim}`);
    }
    this.name = `hashed:${dim}`;
  }

  async encode(texts: string[]): Promise<Float32Array[]> {
    return texts.map((text, i) => this.encodeOne(text, i));
  }

  private encodeOne(text: string, index: number): Float32Array {
    const features = tokenize(text);
    if (features.length === 0) {
      throw new EncodeError(`item ${index}: no tokens to encode`);
    }
    const acc = new Float64Array(this.dim);
    for (const feature of features) {
      const bucket = fnv1a(feature, 0) % this.dim;
      const sign = fnv1a(feature, 0x9e3779b9) & 1 ? 1 : -1;
      acc[bucket] += sign;
    }
    let norm = 0;
    for (let j = 0; j < this.dim; j++) norm += acc[j]! * acc[j]!;
    norm = Math.sqrt(norm);
    if (norm === 0) {
      // signs cancelled exactly; treat like an un-encodable item
      throw new EncodeError(`item ${index}: features hash to the zero vector`);
    }
    const out = new Float32Array(this.dim);
    const scale = this.normalize ? 1 / norm : 1;
    for (let j = 0; j < this.dim; j++) out[j] = acc[j]! * scale;
    return out;
  }
}

/** Transformer-backed encoder; requires @xenova/transformers to be installed. */
class TransformerEncoder implements Encoder {
  dim = 0;
  private pipe: Promise<any> | null = null;

  constructor(readonly name: string, readonly normalize: boolean) {}

  private async load(): Promise<any> {
    if (!this.pipe) {
      let mod: any;
      try {
        mod = await import("@xenova/transformers" as string);
      } catch {
        throw new ModelUnavailableError(
          `model ${this.name} needs the optional @xenova/transformers package; ` +
            `install it, or use a hashed:<dim> model for an offline export`,
        );
      }
      this.pipe = mod.pipeline("feature-extraction", this.name);
    }
    return this.pipe;
  }

  async encode(texts: string[]): Promise<Float32Array[]> {
    const pipe = await this.load();
    const rows: Float32Array[] = [];
    for (const text of texts) {
      const output = await pipe(text, { pooling: "mean", normalize: this.normalize });
      const row = Float32Array.from(output.data as Iterable<number>);
      this.dim = row.length;
      rows.push(row);
    }
    return rows;
  }
}

export function resolveEncoder(name: string, normalize: boolean): Encoder {
  const hashed = /^hashed:(\d+)$/.exec(name);
  if (hashed) {
    return new HashedEncoder(Number(hashed[1]), normalize);
  }
  return new TransformerEncoder(name, normalize);
}
