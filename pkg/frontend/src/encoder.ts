/**
 * Encoders turn image bytes and prompt strings into embeddings in a shared
 * space. The mock encoder is fully deterministic and needs no model
 * assets: mock "images" carry their latent vector in the file itself, and
 * prompt embeddings are seeded by the prompt text, so datasets written by
 * the companion generator have real class structure.
 */

export interface Encoder {
  readonly id: string;
  readonly dim: number;
  encodeTexts(prompts: string[]): Promise<Float64Array[]>;
  encodeImages(images: Buffer[]): Promise<Float64Array[]>;
}

export const MOCK_IMAGE_MAGIC = "MOCKIMG1";

export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** Small deterministic PRNG (mulberry32). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function gaussianVector(rand: () => number, dim: number): Float64Array {
  const out = new Float64Array(dim);
  for (let i = 0; i < dim; i += 2) {
    const u = Math.max(rand(), 1e-12);
    const v = rand();
    const r = Math.sqrt(-2 * Math.log(u));
    out[i] = r * Math.cos(2 * Math.PI * v);
    if (i + 1 < dim) out[i + 1] = r * Math.sin(2 * Math.PI * v);
  }
  return out;
}

export function l2normalize(v: Float64Array): Float64Array {
  let norm = 0;
  for (const x of v) norm += x * x;
  norm = Math.sqrt(norm);
  if (norm === 0) throw new Error("cannot normalize a zero vector");
  return v.map((x) => x / norm) as Float64Array;
}

export function encodeMockImage(vector: Float64Array): Buffer {
  const buf = Buffer.alloc(8 + 2 + 4 * vector.length);
  buf.write(MOCK_IMAGE_MAGIC, 0, "ascii");
  buf.writeUInt16LE(vector.length, 8);
  vector.forEach((v, i) => buf.writeFloatLE(Math.fround(v), 10 + 4 * i));
  return buf;
}

export function decodeMockImage(bytes: Buffer): Float64Array {
  if (bytes.length < 10 || bytes.toString("ascii", 0, 8) !== MOCK_IMAGE_MAGIC) {
    throw new Error("not a mock image file");
  }
  const dim = bytes.readUInt16LE(8);
  if (bytes.length !== 10 + 4 * dim) {
    throw new Error(`mock image payload truncated (dim ${dim})`);
  }
  const out = new Float64Array(dim);
  for (let i = 0; i < dim; i++) out[i] = bytes.readFloatLE(10 + 4 * i);
  return out;
}

export class MockEncoder implements Encoder {
  readonly id = "mock";

  constructor(readonly dim: number = 24) {}

  async encodeTexts(prompts: string[]): Promise<Float64Array[]> {
    return prompts.map((p) =>
      l2normalize(gaussianVector(mulberry32(fnv1a(`text:${p}`)), this.dim))
    );
  }

  async encodeImages(images: Buffer[]): Promise<Float64Array[]> {
    return images.map((bytes) => {
      const v = decodeMockImage(bytes);
      if (v.length !== this.dim) {
        throw new Error(`mock image dimension ${v.length} != encoder dimension ${this.dim}`);
      }
      return l2normalize(v);
    });
  }
}

export function resolveEncoder(id: string, dim?: number): Encoder {
  if (id === "mock") return new MockEncoder(dim);
  throw new Error(
    `model assets for encoder '${id}' are not available; only the deterministic ` +
      "'mock' encoder ships with this extractor"
  );
}
