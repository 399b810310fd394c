import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join, resolve } from "node:path";

import { decodePpm } from "./netpbm.js";
import { encodePgm } from "./netpbm.js";
import { resizeNearest } from "./image.js";
import { segment } from "./segment.js";
import { partitionMask } from "./maskspec.js";
import { DEFAULT_MODEL, ModelConfig, TinyVit } from "./vit.js";
import {
  ClassTally,
  DEFAULT_FAILURE_THRESHOLD,
  FailureThreshold,
  filterClasses,
} from "./filter.js";
import { DatasetRow, writeDataset } from "./ddigfile.js";

/** One line of the input index: where an image lives and what it shows. */
export interface IndexEntry {
  item_id: string;
  region: string;
  object_class: string;
  file: string;
}

export interface ExtractionConfig {
  imageRoot: string;
  indexPath: string;
  split: "real" | "generated";
  /** Output prefix; files land at {prefix}.{view}.ddig etc. */
  outPrefix: string;
  model?: ModelConfig;
  /** Pixel objectness threshold for the detector, in (0, 1). */
  detectorConfidence?: number;
  failureThreshold?: FailureThreshold;
}

export interface ExtractionSummary {
  written: string[];
  reportPath: string;
  items: number;
  segmented: number;
  droppedClasses: string[];
  tallies: Record<string, ClassTally>;
}

export class ExtractionError extends Error {}

export function readIndex(path: string): IndexEntry[] {
  const text = readFileSync(path, "utf-8");
  const entries: IndexEntry[] = [];
  const seen = new Set<string>();
  for (const [lineno, line] of text.split("\n").entries()) {
    if (!line.trim()) continue;
    let obj: Record<string, unknown>;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new ExtractionError(`${path} line ${lineno + 1}: invalid JSON: ${err}`);
    }
    for (const key of ["item_id", "region", "object_class", "file"]) {
      if (typeof obj[key] !== "string" || !obj[key]) {
        throw new ExtractionError(`${path} line ${lineno + 1}: missing ${key}`);
      }
    }
    const entry = obj as unknown as IndexEntry;
    if (seen.has(entry.item_id)) {
      throw new ExtractionError(`${path}: duplicate item_id ${entry.item_id}`);
    }
    seen.add(entry.item_id);
    entries.push(entry);
  }
  return entries;
}

function safeName(itemId: string): string {
  return itemId.replace(/[^A-Za-z0-9._-]/g, "_");
}

interface ItemResult {
  entry: IndexEntry;
  hasSegmentation: boolean;
  full: Float32Array;
  object: Float32Array | null;
  background: Float32Array;
}

/**
 * Full pipeline over one image index: decode and resize each image,
 * segment it with its class prompt, fetch the per-view attention specs
 * from the metrics CLI for segmented items, run the encoder, drop classes
 * whose segmentation failure rate exceeds the threshold, and write the
 * three-view dataset plus a sidecar extraction report.
 *
 * Items without a detection keep their full and background rows (the
 * background row carries full-image content) and are flagged
 * has_object_segmentation=false; they emit no object row.
 */
export function runExtraction(config: ExtractionConfig): ExtractionSummary {
  const confidence = config.detectorConfidence ?? 0.5;
  if (confidence <= 0 || confidence >= 1) {
    throw new ExtractionError(`detector confidence must be in (0, 1), got ${confidence}`);
  }
  const threshold = config.failureThreshold ?? DEFAULT_FAILURE_THRESHOLD;
  const modelConfig = config.model ?? DEFAULT_MODEL;
  const model = new TinyVit(modelConfig);
  const { imageSize, patchSize } = modelConfig;

  const entries = readIndex(config.indexPath);
  const maskDir = `${config.outPrefix}.masks`;
  mkdirSync(maskDir, { recursive: true });

  const tallies = new Map<string, ClassTally>();
  const results: ItemResult[] = [];
  for (const entry of entries) {
    const imagePath = resolve(config.imageRoot, entry.file);
    const image = decodePpm(readFileSync(imagePath), imagePath);
    const resized = resizeNearest(image, imageSize);

    const tally = tallies.get(entry.object_class) ?? { images: 0, failures: 0 };
    tally.images++;

    const mask = segment(resized, entry.object_class, confidence);
    let objectRow: Float32Array | null = null;
    let backgroundRow: Float32Array;
    const fullRow = model.forward(resized, []);
    if (mask) {
      const maskPath = join(maskDir, `${safeName(entry.item_id)}.pgm`);
      writeFileSync(maskPath, encodePgm(mask));
      const objectSpec = partitionMask(maskPath, "object", imageSize, patchSize);
      const backgroundSpec = partitionMask(maskPath, "background", imageSize, patchSize);
      objectRow = model.forward(resized, objectSpec.zeroed);
      backgroundRow = model.forward(resized, backgroundSpec.zeroed);
    } else {
      tally.failures++;
      backgroundRow = fullRow; // no mask: background carries full content
    }
    tallies.set(entry.object_class, tally);
    results.push({
      entry,
      hasSegmentation: mask !== null,
      full: fullRow,
      object: objectRow,
      background: backgroundRow,
    });
  }

  const retained = new Set(filterClasses(tallies, threshold));
  const droppedClasses = [...tallies.keys()].filter((c) => !retained.has(c)).sort();

  const rows: DatasetRow[] = [];
  let segmented = 0;
  let emitted = 0;
  for (const item of results) {
    if (!retained.has(item.entry.object_class)) continue;
    emitted++;
    if (item.hasSegmentation) segmented++;
    const base = {
      item_id: item.entry.item_id,
      split: config.split,
      region: item.entry.region,
      object_class: item.entry.object_class,
      has_object_segmentation: item.hasSegmentation,
    };
    rows.push({ record: { ...base, view: "full", row_index: 0 }, vector: item.full });
    if (item.object) {
      rows.push({ record: { ...base, view: "object", row_index: 0 }, vector: item.object });
    }
    rows.push({ record: { ...base, view: "background", row_index: 0 }, vector: item.background });
  }

  const written = writeDataset(config.outPrefix, modelConfig.dim, rows);

  // alternate encoders are allowed; the report says which one ran
  const report = {
    model: {
      name: "seeded-tiny-vit",
      image_size: modelConfig.imageSize,
      patch_size: modelConfig.patchSize,
      dim: modelConfig.dim,
      layers: modelConfig.layers,
      heads: modelConfig.heads,
      seed: modelConfig.seed,
      pretrained: false,
    },
    detector: { name: "prompt-hue-threshold", confidence },
    failure_threshold: threshold,
    split: config.split,
    items_indexed: entries.length,
    items_emitted: emitted,
    items_segmented: segmented,
    dropped_classes: droppedClasses,
    class_tallies: Object.fromEntries(
      [...tallies.entries()].sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0)),
    ),
  };
  const reportPath = `${config.outPrefix}.extraction.json`;
  writeFileSync(reportPath, JSON.stringify(report, null, 2) + "\n");

  return {
    written,
    reportPath,
    items: emitted,
    segmented,
    droppedClasses,
    tallies: Object.fromEntries(tallies),
  };
}
