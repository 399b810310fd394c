import { writeFileSync, readFileSync } from "node:fs";

/**
 * Writer (and reader, for round-trip checks) of the .ddig embedding
 * container consumed by the metrics CLI.
 *
 * Layout: 4-byte magic "DDIG", uint16 LE format version (1), uint32 LE
 * dimension, uint32 LE row count, then row-major float32 LE vectors.
 * A sidecar JSONL manifest describes every row across the dataset's views.
 */

export const MAGIC = "DDIG";
export const FORMAT_VERSION = 1;
export const HEADER_SIZE = 14;

export const VIEWS = ["full", "object", "background"] as const;
export type View = (typeof VIEWS)[number];

export interface ManifestRecord {
  item_id: string;
  split: "real" | "generated";
  region: string;
  object_class: string;
  view: View;
  row_index: number;
  has_object_segmentation: boolean;
}

export class DdigFormatError extends Error {}

export function encodeDdig(dimension: number, rows: Float32Array[]): Buffer {
  if (!Number.isInteger(dimension) || dimension <= 0) {
    throw new DdigFormatError(`dimension must be a positive integer, got ${dimension}`);
  }
  for (const row of rows) {
    if (row.length !== dimension) {
      throw new DdigFormatError(`row length ${row.length} != dimension ${dimension}`);
    }
  }
  const buf = Buffer.alloc(HEADER_SIZE + rows.length * dimension * 4);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt16LE(FORMAT_VERSION, 4);
  buf.writeUInt32LE(dimension, 6);
  buf.writeUInt32LE(rows.length, 10);
  let off = HEADER_SIZE;
  for (const row of rows) {
    for (let i = 0; i < dimension; i++) {
      buf.writeFloatLE(row[i], off);
      off += 4;
    }
  }
  return buf;
}

export function decodeDdig(buf: Buffer, where = "ddig"): { dimension: number; rows: Float32Array[] } {
  if (buf.length < HEADER_SIZE || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new DdigFormatError(`${where}: not a ${MAGIC} file`);
  }
  const version = buf.readUInt16LE(4);
  if (version !== FORMAT_VERSION) {
    throw new DdigFormatError(`${where}: version ${version}, expected ${FORMAT_VERSION}`);
  }
  const dimension = buf.readUInt32LE(6);
  const n = buf.readUInt32LE(10);
  if (buf.length - HEADER_SIZE !== n * dimension * 4) {
    throw new DdigFormatError(
      `${where}: payload is ${buf.length - HEADER_SIZE} bytes, header implies ${n * dimension * 4}`,
    );
  }
  const rows: Float32Array[] = [];
  for (let r = 0; r < n; r++) {
    const row = new Float32Array(dimension);
    for (let i = 0; i < dimension; i++) {
      row[i] = buf.readFloatLE(HEADER_SIZE + (r * dimension + i) * 4);
    }
    rows.push(row);
  }
  return { dimension, rows };
}

/** One embedding row plus the manifest fields that describe it. */
export interface DatasetRow {
  record: ManifestRecord;
  vector: Float32Array;
}

/**
 * Write {prefix}.{view}.ddig for each view plus {prefix}.manifest.jsonl.
 * Rows are numbered per view in the order given; record.row_index is
 * assigned here. Manifest lines keep the field order the metrics CLI
 * emits and list views in full, object, background order.
 */
export function writeDataset(prefix: string, dimension: number, rows: DatasetRow[]): string[] {
  const byView = new Map<View, DatasetRow[]>(VIEWS.map((v) => [v, []]));
  for (const row of rows) {
    const bucket = byView.get(row.record.view);
    if (!bucket) throw new DdigFormatError(`unknown view ${row.record.view}`);
    bucket.push(row);
  }
  const written: string[] = [];
  const manifestLines: string[] = [];
  for (const view of VIEWS) {
    const bucket = byView.get(view)!;
    const vectors: Float32Array[] = [];
    bucket.forEach((row, index) => {
      row.record.row_index = index;
      vectors.push(row.vector);
      manifestLines.push(
        JSON.stringify({
          item_id: row.record.item_id,
          split: row.record.split,
          region: row.record.region,
          object_class: row.record.object_class,
          view: row.record.view,
          row_index: row.record.row_index,
          has_object_segmentation: row.record.has_object_segmentation,
        }),
      );
    });
    const path = `${prefix}.${view}.ddig`;
    writeFileSync(path, encodeDdig(dimension, vectors));
    written.push(path);
  }
  const manifestPath = `${prefix}.manifest.jsonl`;
  writeFileSync(manifestPath, manifestLines.join("\n") + "\n");
  written.push(manifestPath);
  return written;
}

export function readManifest(path: string): ManifestRecord[] {
  const text = readFileSync(path, "utf-8");
  const records: ManifestRecord[] = [];
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    records.push(JSON.parse(line) as ManifestRecord);
  }
  return records;
}
