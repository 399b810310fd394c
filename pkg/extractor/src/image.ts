import { RgbImage } from "./netpbm.js";

/**
 * Nearest-neighbor resample to size x size using center-point sampling in
 * exact integer arithmetic: source index = ((2t + 1) * extent) / (2 * size),
 * floored. Matches the mask resampling rule of the metrics CLI so images
 * and masks stay pixel-aligned, and is idempotent at the same size.
 */
export function resizeNearest(image: RgbImage, size: number): RgbImage {
  if (image.width === size && image.height === size) return image;
  const rows = new Int32Array(size);
  const cols = new Int32Array(size);
  for (let t = 0; t < size; t++) {
    rows[t] = Math.floor(((2 * t + 1) * image.height) / (2 * size));
    cols[t] = Math.floor(((2 * t + 1) * image.width) / (2 * size));
  }
  const out = new Uint8Array(size * size * 3);
  for (let y = 0; y < size; y++) {
    const srcRow = rows[y] * image.width;
    for (let x = 0; x < size; x++) {
      const src = (srcRow + cols[x]) * 3;
      const dst = (y * size + x) * 3;
      out[dst] = image.data[src];
      out[dst + 1] = image.data[src + 1];
      out[dst + 2] = image.data[src + 2];
    }
  }
  return { width: size, height: size, data: out };
}

/** Hue in degrees [0, 360) and saturation in [0, 1] of one RGB pixel. */
export function hueSat(r: number, g: number, b: number): { hue: number; sat: number } {
  const max = Math.max(r, g, b);
  const min = Math.min(r, g, b);
  const chroma = max - min;
  if (chroma === 0) return { hue: 0, sat: 0 };
  let hue: number;
  if (max === r) {
    hue = 60 * (((g - b) / chroma + 6) % 6);
  } else if (max === g) {
    hue = 60 * ((b - r) / chroma + 2);
  } else {
    hue = 60 * ((r - g) / chroma + 4);
  }
  return { hue, sat: chroma / 255 };
}

/** Shorter arc between two hues, in degrees [0, 180]. */
export function hueDistance(a: number, b: number): number {
  const d = Math.abs(a - b) % 360;
  return d > 180 ? 360 - d : d;
}
