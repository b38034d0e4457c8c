/**
 * Datasets follow the directory convention `<root>/<split>/<class>/<file>`;
 * class names are the sorted subdirectory names and labels follow from the
 * directory an image lives in. The generator writes deterministic mock
 * datasets whose images cluster around per-class anchors in the mock
 * encoder's text-embedding space.
 */

import { promises as fs } from "fs";
import * as path from "path";

import {
  MockEncoder,
  encodeMockImage,
  gaussianVector,
  l2normalize,
  mulberry32,
  fnv1a,
} from "./encoder.js";

export interface DatasetIndex {
  classNames: string[];
  files: string[];
  labels: Uint32Array;
}

export async function indexDataset(root: string, split: string): Promise<DatasetIndex> {
  const splitDir = path.join(root, split);
  let entries;
  try {
    entries = await fs.readdir(splitDir, { withFileTypes: true });
  } catch {
    throw new Error(`dataset split directory not found: ${splitDir}`);
  }
  const classNames = entries
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (classNames.length === 0) {
    throw new Error(`no class directories under ${splitDir}`);
  }
  const files: string[] = [];
  const labels: number[] = [];
  for (let c = 0; c < classNames.length; c++) {
    const classDir = path.join(splitDir, classNames[c]);
    const images = (await fs.readdir(classDir)).sort();
    if (images.length === 0) {
      throw new Error(`class '${classNames[c]}' has no images`);
    }
    for (const name of images) {
      files.push(path.join(classDir, name));
      labels.push(c);
    }
  }
  return { classNames, files, labels: Uint32Array.from(labels) };
}

export interface MockDatasetSpec {
  root: string;
  split: string;
  classNames: string[];
  imagesPerClass: number;
  seed: number;
  noise: number; // embedding-space spread around the class anchor
  tilt?: number; // dataset-wide direction shared by images but absent from
  // the prompts; emulates prompt/image miscalibration, which is what makes
  // per-row argmax suboptimal and batch inference worthwhile
  qualitySpread?: number; // in [0, 1): how unevenly well the prompts match
  // their classes; weak-prompt classes lose per-row argmax systematically
  // while their image clusters stay coherent
  coneScale?: number; // magnitude of a shared direction all images carry
  // (the modality cone); larger values compress every cosine into a narrow
  // band, which keeps the temperature-softmax rows diffuse
  dim?: number;
  promptTemplate?: string;
}

/** Write a mock dataset whose image vectors sit near the anchors the mock
 * encoder will assign to the class prompts. */
export async function generateMockDataset(spec: MockDatasetSpec): Promise<void> {
  const dim = spec.dim ?? 24;
  const tilt = spec.tilt ?? 0;
  const template = spec.promptTemplate ?? "a photo of a {}";
  const encoder = new MockEncoder(dim);
  const anchors = await encoder.encodeTexts(
    spec.classNames.map((name) => template.replace("{}", name))
  );
  const tiltDirection = l2normalize(
    gaussianVector(mulberry32(fnv1a(`tilt:${spec.seed}`)), dim)
  );
  const qualitySpread = spec.qualitySpread ?? 0;
  const qualityRand = mulberry32(fnv1a(`quality:${spec.seed}`));
  const quality = spec.classNames.map(() => 1 - qualitySpread * qualityRand());
  const coneScale = spec.coneScale ?? 0;
  const cone = l2normalize(gaussianVector(mulberry32(fnv1a(`cone:${spec.seed}`)), dim));
  for (let c = 0; c < spec.classNames.length; c++) {
    const classDir = path.join(spec.root, spec.split, spec.classNames[c]);
    await fs.mkdir(classDir, { recursive: true });
    for (let i = 0; i < spec.imagesPerClass; i++) {
      const rand = mulberry32(fnv1a(`${spec.seed}:${spec.split}:${c}:${i}`));
      const g = l2normalize(gaussianVector(rand, dim)); // unit direction, so
      // noise is the displacement length relative to the unit anchor
      const v = new Float64Array(dim);
      for (let j = 0; j < dim; j++) {
        v[j] =
          coneScale * cone[j] +
          quality[c] * anchors[c][j] +
          spec.noise * g[j] +
          tilt * tiltDirection[j];
      }
      const name = `img_${String(i).padStart(4, "0")}.mockimg`;
      await fs.writeFile(path.join(classDir, name), encodeMockImage(l2normalize(v)));
    }
  }
}
