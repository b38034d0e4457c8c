/**
 * Extraction pipeline: encode images and one prompt per class, take cosine
 * similarities, and either store temperature-softmax probability rows or
 * the L2-normalized visual embeddings, as a container + manifest pair.
 */

import { FeatureMatrix, Manifest, writeContainer } from "./container.js";
import { Encoder, resolveEncoder } from "./encoder.js";
import { indexDataset } from "./dataset.js";
import { promises as fs } from "fs";

export interface ExtractionJob {
  dataset: string; // dataset root directory
  split: string;
  encoder: string;
  temperature: number;
  kind: "probabilities" | "raw_embeddings";
  out: string;
  promptTemplate?: string;
  prompts?: string[]; // explicit per-class prompts, overrides the template
  encoderDim?: number;
}

export function cosineSimilarities(
  imageEmbeddings: Float64Array[],
  textEmbeddings: Float64Array[]
): Float64Array[] {
  return imageEmbeddings.map((img) => {
    const sims = new Float64Array(textEmbeddings.length);
    let imgNorm = 0;
    for (const x of img) imgNorm += x * x;
    imgNorm = Math.sqrt(imgNorm);
    textEmbeddings.forEach((txt, k) => {
      let dot = 0;
      let txtNorm = 0;
      for (let j = 0; j < img.length; j++) {
        dot += img[j] * txt[j];
        txtNorm += txt[j] * txt[j];
      }
      sims[k] = dot / (imgNorm * Math.sqrt(txtNorm));
    });
    return sims;
  });
}

/** Row softmax of temperature-scaled scores, computed in double precision
 * with max subtraction. */
export function temperatureSoftmax(scores: Float64Array[], temperature: number): Float64Array[] {
  if (!(temperature > 0)) throw new Error("temperature must be positive");
  return scores.map((row) => {
    let max = -Infinity;
    for (const v of row) max = Math.max(max, v * temperature);
    const out = new Float64Array(row.length);
    let total = 0;
    for (let k = 0; k < row.length; k++) {
      out[k] = Math.exp(row[k] * temperature - max);
      total += out[k];
    }
    for (let k = 0; k < row.length; k++) out[k] /= total;
    return out;
  });
}

export interface ExtractionResult {
  nSamples: number;
  dim: number;
  classNames: string[];
  out: string;
  manifest: Manifest;
}

export async function extract(job: ExtractionJob): Promise<ExtractionResult> {
  const index = await indexDataset(job.dataset, job.split);
  const template = job.promptTemplate ?? "a photo of a {}";
  let prompts: string[];
  if (job.prompts) {
    if (job.prompts.length !== index.classNames.length) {
      throw new Error(
        `${job.prompts.length} prompts for ${index.classNames.length} classes`
      );
    }
    prompts = job.prompts;
  } else {
    prompts = index.classNames.map((name) => template.replace("{}", name));
  }

  const encoder: Encoder = resolveEncoder(job.encoder, job.encoderDim);
  const images = await Promise.all(index.files.map((f) => fs.readFile(f)));
  const imageEmbeddings = await encoder.encodeImages(images);
  const textEmbeddings = await encoder.encodeTexts(prompts);

  let rows: Float64Array[];
  let kind: FeatureMatrix["contentKind"];
  if (job.kind === "probabilities") {
    rows = temperatureSoftmax(cosineSimilarities(imageEmbeddings, textEmbeddings), job.temperature);
    kind = "simplex_probabilities";
  } else {
    rows = imageEmbeddings;
    kind = "raw_embeddings";
  }

  const manifest: Manifest = {
    dataset: `${job.dataset}:${job.split}`,
    class_names: index.classNames,
    temperature: job.kind === "probabilities" ? job.temperature : null,
    encoder: encoder.id,
    prompt_template: job.prompts ? null : template,
    created_at: null,
  };
  await writeContainer({ rows, contentKind: kind, labels: index.labels }, manifest, job.out);
  return {
    nSamples: rows.length,
    dim: rows[0].length,
    classNames: index.classNames,
    out: job.out,
    manifest,
  };
}
