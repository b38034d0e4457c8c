/**
 * extract --dataset DIR --split SPLIT --temperature 30 --kind probabilities --out PATH
 *         [--encoder mock] [--prompt-template "a photo of a {}"]
 * generate-mock --root DIR --split SPLIT --classes a,b,c --per-class N
 *         [--seed 0] [--noise 0.5] [--tilt 0.3] [--quality-spread 0.5] [--cone-scale 2] [--dim 24]
 */

import { extract } from "./extract.js";
import { generateMockDataset } from "./dataset.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near '${key}'`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) throw new Error(`missing required flag --${name}`);
  return value;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === "extract") {
      const flags = parseFlags(rest);
      const kind = flags.get("kind") ?? "probabilities";
      if (kind !== "probabilities" && kind !== "raw_embeddings") {
        throw new Error(`unknown kind '${kind}'`);
      }
      const result = await extract({
        dataset: need(flags, "dataset"),
        split: need(flags, "split"),
        encoder: flags.get("encoder") ?? "mock",
        temperature: Number(flags.get("temperature") ?? "30"),
        kind,
        out: need(flags, "out"),
        promptTemplate: flags.get("prompt-template"),
      });
      console.error(
        `wrote ${result.out}: ${result.nSamples} x ${result.dim} ` +
          `(${result.classNames.length} classes)`
      );
      return 0;
    }
    if (command === "generate-mock") {
      const flags = parseFlags(rest);
      await generateMockDataset({
        root: need(flags, "root"),
        split: need(flags, "split"),
        classNames: need(flags, "classes").split(","),
        imagesPerClass: Number(flags.get("per-class") ?? "30"),
        seed: Number(flags.get("seed") ?? "0"),
        noise: Number(flags.get("noise") ?? "0.5"),
        tilt: Number(flags.get("tilt") ?? "0.3"),
        qualitySpread: Number(flags.get("quality-spread") ?? "0.5"),
        coneScale: Number(flags.get("cone-scale") ?? "2"),
        dim: Number(flags.get("dim") ?? "24"),
      });
      console.error("mock dataset written");
      return 0;
    }
    console.error("usage: extract | generate-mock (see source header)");
    return 2;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
