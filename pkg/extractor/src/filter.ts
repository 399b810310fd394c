/** Segmentation failure tally for one object class. */
export interface ClassTally {
  images: number;
  failures: number;
}

/**
 * Exclusion threshold as a fraction so the comparison stays in integer
 * arithmetic: a class is dropped when failures / images exceeds
 * maxFailures / perImages strictly. The default drops a class with 101
 * failures out of 1020 images and keeps one with exactly 100.
 */
export interface FailureThreshold {
  maxFailures: number;
  perImages: number;
}

export const DEFAULT_FAILURE_THRESHOLD: FailureThreshold = {
  maxFailures: 100,
  perImages: 1020,
};

export function checkThreshold(threshold: FailureThreshold): void {
  const { maxFailures, perImages } = threshold;
  if (!Number.isInteger(maxFailures) || !Number.isInteger(perImages) || perImages <= 0) {
    throw new RangeError(`malformed failure threshold ${maxFailures}/${perImages}`);
  }
  const rate = maxFailures / perImages;
  if (rate <= 0 || rate >= 1) {
    throw new RangeError(`failure threshold must be in (0, 1), got ${rate}`);
  }
}

/**
 * Returns the sorted class names whose failure rate does not exceed the
 * threshold. Classes with zero images are dropped (nothing to retain).
 */
export function filterClasses(
  tallies: Map<string, ClassTally>,
  threshold: FailureThreshold = DEFAULT_FAILURE_THRESHOLD,
): string[] {
  checkThreshold(threshold);
  const retained: string[] = [];
  for (const [name, tally] of tallies) {
    if (tally.images <= 0) continue;
    if (tally.failures < 0 || tally.failures > tally.images) {
      throw new RangeError(
        `class ${name}: ${tally.failures} failures out of ${tally.images} images`,
      );
    }
    // strict "over": failures/images > maxFailures/perImages, cross-multiplied
    const over = tally.failures * threshold.perImages > threshold.maxFailures * tally.images;
    if (!over) retained.push(name);
  }
  return retained.sort();
}
