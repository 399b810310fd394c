import { GrayImage, RgbImage } from "./netpbm.js";
import { hueDistance, hueSat } from "./image.js";
import { fnv1a } from "./rng.js";

export const OBJECT_VALUE = 255;
export const BACKGROUND_VALUE = 0;

/** Hue tolerance around the prompt's target hue, degrees. */
const HUE_TOLERANCE = 30;

/**
 * Each class prompt grounds to one target hue. Deterministic and
 * case-sensitive; the fixture generator paints objects with the same
 * mapping so prompt and pixels agree.
 */
export function promptHue(prompt: string): number {
  return fnv1a(prompt) % 360;
}

/**
 * Prompt-grounded color segmenter. A pixel belongs to the object when its
 * colorfulness (chroma / 255) reaches `confidence` and its hue lies within
 * 30 degrees of the prompt's target hue. Disconnected matches merge into
 * one union mask; returns null when nothing matches, which callers record
 * as a segmentation failure rather than an error.
 */
export function segment(
  image: RgbImage,
  prompt: string,
  confidence: number,
): GrayImage | null {
  if (confidence <= 0 || confidence >= 1) {
    throw new RangeError(`confidence must be in (0, 1), got ${confidence}`);
  }
  const target = promptHue(prompt);
  const n = image.width * image.height;
  const data = new Uint8Array(n); // zero-filled: background
  let hits = 0;
  for (let i = 0; i < n; i++) {
    const { hue, sat } = hueSat(
      image.data[i * 3],
      image.data[i * 3 + 1],
      image.data[i * 3 + 2],
    );
    if (sat >= confidence && hueDistance(hue, target) <= HUE_TOLERANCE) {
      data[i] = OBJECT_VALUE;
      hits++;
    }
  }
  if (hits === 0) return null;
  return { width: image.width, height: image.height, data };
}
