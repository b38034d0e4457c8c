/**
 * Binary feature container + JSON manifest sidecar.
 *
 * Layout (little-endian): 8-byte magic "SMPXFT01", u16 version (1),
 * u8 content kind (1 = simplex probabilities, 2 = raw embeddings),
 * u8 dtype (1 = f32, 2 = f64), u8 has_labels, 3 reserved bytes,
 * u64 n_samples, u64 dim; then the row-major payload and, if labeled,
 * one u32 label per row. The sidecar lives at `<path>.json`.
 */

import { promises as fs } from "fs";

export const MAGIC = "SMPXFT01";
export const HEADER_SIZE = 32;
export const ROW_SUM_ATOL = 1e-5;

export type ContentKind = "simplex_probabilities" | "raw_embeddings";

export interface Manifest {
  dataset: string;
  class_names: string[] | null;
  temperature: number | null;
  encoder: string;
  prompt_template: string | null;
  created_at: string | null;
}

export interface FeatureMatrix {
  rows: Float64Array[]; // n rows of length dim
  contentKind: ContentKind;
  labels: Uint32Array | null;
}

const CONTENT_CODES: Record<ContentKind, number> = {
  simplex_probabilities: 1,
  raw_embeddings: 2,
};

export class ContainerFormatError extends Error {}

function validateProbabilityRows(rows: Float64Array[]): void {
  rows.forEach((row, i) => {
    let sum = 0;
    for (const v of row) {
      if (v < -ROW_SUM_ATOL) {
        throw new ContainerFormatError(`probability row ${i} has a negative entry`);
      }
      sum += v;
    }
    if (Math.abs(sum - 1) > ROW_SUM_ATOL) {
      throw new ContainerFormatError(
        `probability row ${i} sums to ${sum.toFixed(8)}, expected 1 within ${ROW_SUM_ATOL}`
      );
    }
  });
}

export function encodeContainer(features: FeatureMatrix): Buffer {
  const n = features.rows.length;
  if (n === 0) throw new ContainerFormatError("no rows to write");
  const dim = features.rows[0].length;
  if (features.rows.some((r) => r.length !== dim)) {
    throw new ContainerFormatError("ragged rows");
  }
  if (features.contentKind === "simplex_probabilities") {
    validateProbabilityRows(features.rows);
  }
  if (features.labels && features.labels.length !== n) {
    throw new ContainerFormatError("one label per row required");
  }
  const hasLabels = features.labels ? 1 : 0;
  const size = HEADER_SIZE + 4 * n * dim + 4 * n * hasLabels;
  const buf = Buffer.alloc(size);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt16LE(1, 8);
  buf.writeUInt8(CONTENT_CODES[features.contentKind], 10);
  buf.writeUInt8(1, 11); // f32 storage
  buf.writeUInt8(hasLabels, 12);
  buf.writeBigUInt64LE(BigInt(n), 16);
  buf.writeBigUInt64LE(BigInt(dim), 24);
  let off = HEADER_SIZE;
  for (const row of features.rows) {
    for (const v of row) {
      buf.writeFloatLE(Math.fround(v), off);
      off += 4;
    }
  }
  if (features.labels) {
    for (const label of features.labels) {
      buf.writeUInt32LE(label, off);
      off += 4;
    }
  }
  return buf;
}

export function decodeContainer(buf: Buffer): FeatureMatrix {
  if (buf.length < HEADER_SIZE) {
    throw new ContainerFormatError(`file shorter than the ${HEADER_SIZE}-byte header`);
  }
  if (buf.toString("ascii", 0, 8) !== MAGIC) {
    throw new ContainerFormatError("not a feature container (bad magic)");
  }
  const version = buf.readUInt16LE(8);
  if (version !== 1) throw new ContainerFormatError(`unsupported version ${version}`);
  const content = buf.readUInt8(10);
  const dtype = buf.readUInt8(11);
  const hasLabels = buf.readUInt8(12);
  const n = Number(buf.readBigUInt64LE(16));
  const dim = Number(buf.readBigUInt64LE(24));
  const kind = (Object.keys(CONTENT_CODES) as ContentKind[]).find(
    (k) => CONTENT_CODES[k] === content
  );
  if (!kind) throw new ContainerFormatError(`unknown content kind code ${content}`);
  if (dtype !== 1 && dtype !== 2) {
    throw new ContainerFormatError(`unknown dtype code ${dtype}`);
  }
  const itemSize = dtype === 1 ? 4 : 8;
  const expected = HEADER_SIZE + itemSize * n * dim + (hasLabels ? 4 * n : 0);
  if (buf.length !== expected) {
    throw new ContainerFormatError(
      `expected ${expected} bytes for ${n} x ${dim} payload, file has ${buf.length}`
    );
  }
  const rows: Float64Array[] = [];
  let off = HEADER_SIZE;
  for (let i = 0; i < n; i++) {
    const row = new Float64Array(dim);
    for (let j = 0; j < dim; j++) {
      row[j] = dtype === 1 ? buf.readFloatLE(off) : buf.readDoubleLE(off);
      off += itemSize;
    }
    rows.push(row);
  }
  let labels: Uint32Array | null = null;
  if (hasLabels) {
    labels = new Uint32Array(n);
    for (let i = 0; i < n; i++) {
      labels[i] = buf.readUInt32LE(off);
      off += 4;
    }
  }
  if (kind === "simplex_probabilities") validateProbabilityRows(rows);
  return { rows, contentKind: kind, labels };
}

export async function writeContainer(
  features: FeatureMatrix,
  manifest: Manifest,
  path: string
): Promise<void> {
  const record = { ...manifest };
  if (!record.created_at) record.created_at = new Date().toISOString();
  await fs.writeFile(path, encodeContainer(features));
  await fs.writeFile(`${path}.json`, JSON.stringify(record, null, 2));
}

export async function readContainer(
  path: string
): Promise<{ features: FeatureMatrix; manifest: Manifest }> {
  const features = decodeContainer(await fs.readFile(path));
  const manifest = JSON.parse(await fs.readFile(`${path}.json`, "utf-8")) as Manifest;
  return { features, manifest };
}
