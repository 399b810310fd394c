import { parseArgs } from "node:util";

import { runExtraction } from "./extract.js";
import { DEFAULT_MODEL } from "./vit.js";

const USAGE = `usage: extract --index FILE --image-root DIR --split real|generated --out PREFIX
               [--confidence F] [--seed S]

Reads a JSONL image index ({"item_id", "region", "object_class", "file"}
per line), segments each image with its class prompt, extracts full,
object and background view embeddings, and writes PREFIX.{view}.ddig,
PREFIX.manifest.jsonl and PREFIX.extraction.json.`;

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        index: { type: "string" },
        "image-root": { type: "string" },
        split: { type: "string" },
        out: { type: "string" },
        confidence: { type: "string" },
        seed: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
      allowPositionals: false,
    });
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
  const values = parsed.values;
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  for (const key of ["index", "image-root", "split", "out"] as const) {
    if (!values[key]) {
      console.error(`error: --${key} is required\n${USAGE}`);
      return 2;
    }
  }
  const split = values.split as string;
  if (split !== "real" && split !== "generated") {
    console.error(`error: --split must be real or generated, got ${split}`);
    return 2;
  }
  try {
    const summary = runExtraction({
      indexPath: values.index as string,
      imageRoot: values["image-root"] as string,
      split,
      outPrefix: values.out as string,
      detectorConfidence: values.confidence ? Number(values.confidence) : undefined,
      model: values.seed ? { ...DEFAULT_MODEL, seed: values.seed } : undefined,
    });
    for (const path of summary.written) console.log(`wrote: ${path}`);
    console.log(`report: ${summary.reportPath}`);
    console.log(
      `items: ${summary.items} (${summary.segmented} segmented)` +
        (summary.droppedClasses.length
          ? `, dropped classes: ${summary.droppedClasses.join(", ")}`
          : ""),
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

process.exitCode = main(process.argv.slice(2));
