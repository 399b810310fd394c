import { execFileSync } from "node:child_process";

/**
 * Attention mask spec as emitted by the metrics CLI's `partition` command:
 * patches to zero for one view, over an image_size/patch_size grid.
 */
export interface AttentionMaskSpec {
  view: "object" | "background";
  image_size: number;
  patch_size: number;
  zeroed: Array<[number, number]>;
}

/** The metrics CLI binary; override with the DDIG_BIN env var. */
export function ddigBin(): string {
  return process.env.DDIG_BIN ?? "ddig";
}

export class PartitionError extends Error {}

function parseSpec(text: string, where: string): AttentionMaskSpec {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    throw new PartitionError(`${where}: partition output is not JSON: ${err}`);
  }
  const spec = obj as AttentionMaskSpec;
  if (
    (spec.view !== "object" && spec.view !== "background") ||
    !Number.isInteger(spec.image_size) ||
    !Number.isInteger(spec.patch_size) ||
    !Array.isArray(spec.zeroed)
  ) {
    throw new PartitionError(`${where}: malformed attention mask spec`);
  }
  for (const cell of spec.zeroed) {
    if (!Array.isArray(cell) || cell.length !== 2 ||
        !Number.isInteger(cell[0]) || !Number.isInteger(cell[1])) {
      throw new PartitionError(`${where}: malformed zeroed patch entry`);
    }
  }
  return spec;
}

/**
 * Run the metrics CLI on a mask file and return the parsed spec for one
 * view. The CLI owns the patch rule (a patch is object iff it contains at
 * least one object pixel) and any mask resampling.
 */
export function partitionMask(
  maskPath: string,
  view: "object" | "background",
  imageSize: number,
  patchSize: number,
): AttentionMaskSpec {
  let stdout: string;
  try {
    stdout = execFileSync(
      ddigBin(),
      [
        "partition",
        maskPath,
        "--view",
        view,
        "--image-size",
        String(imageSize),
        "--patch-size",
        String(patchSize),
      ],
      { encoding: "utf-8" },
    );
  } catch (err) {
    const detail = err instanceof Error ? err.message : String(err);
    throw new PartitionError(`partition failed for ${maskPath}: ${detail}`);
  }
  return parseSpec(stdout, maskPath);
}
