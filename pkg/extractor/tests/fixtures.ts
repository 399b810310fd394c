import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { encodePpm, RgbImage } from "../src/netpbm.js";
import { IndexEntry } from "../src/extract.js";
import { promptHue } from "../src/segment.js";
import { hueDistance } from "../src/image.js";
import { Rng } from "../src/rng.js";

/**
 * Deterministic 20-image corpus: 2 regions x 2 classes x 5 images.
 * Objects are saturated rectangles painted in their class's prompt hue on
 * a low-saturation gray noise background, so the segmenter's output is
 * pixel-exact the painted geometry. Specials: two blank images (planted
 * segmentation failures), one full-frame object (keep-all attention
 * spec), one two-rectangle image (union mask), one 112x112 image
 * (exercises input resizing).
 */

export const REGIONS = ["Africa", "Europe"] as const;
export const CLASSES = ["bag", "cab"] as const;
export const IMAGE_SIZE = 224;

export interface FixtureInfo {
  imageRoot: string;
  indexPath: string;
  entries: IndexEntry[];
  blankIds: string[];
  fullFrameId: string;
  multiInstanceId: string;
  smallImageId: string;
}

interface Rect {
  x0: number;
  y0: number;
  w: number;
  h: number;
}

export function hsvToRgb(h: number, s: number, v: number): [number, number, number] {
  const c = v * s;
  const hp = (((h % 360) + 360) % 360) / 60;
  const xm = c * (1 - Math.abs((hp % 2) - 1));
  let r = 0, g = 0, b = 0;
  if (hp < 1) [r, g, b] = [c, xm, 0];
  else if (hp < 2) [r, g, b] = [xm, c, 0];
  else if (hp < 3) [r, g, b] = [0, c, xm];
  else if (hp < 4) [r, g, b] = [0, xm, c];
  else if (hp < 5) [r, g, b] = [xm, 0, c];
  else [r, g, b] = [c, 0, xm];
  const m = v - c;
  return [Math.round((r + m) * 255), Math.round((g + m) * 255), Math.round((b + m) * 255)];
}

export function grayBackground(size: number, rng: Rng): RgbImage {
  const data = new Uint8Array(size * size * 3);
  for (let i = 0; i < size * size; i++) {
    const g = rng.int(90, 150);
    data[i * 3] = g + rng.int(-8, 8);
    data[i * 3 + 1] = g + rng.int(-8, 8);
    data[i * 3 + 2] = g + rng.int(-8, 8);
  }
  return { width: size, height: size, data };
}

export function paintRect(image: RgbImage, rect: Rect, hue: number, rng: Rng): void {
  for (let y = rect.y0; y < rect.y0 + rect.h; y++) {
    for (let x = rect.x0; x < rect.x0 + rect.w; x++) {
      const [r, g, b] = hsvToRgb(
        hue + rng.int(-10, 10),
        0.85 + rng.uniform() * 0.1,
        0.75 + rng.uniform() * 0.2,
      );
      const off = (y * image.width + x) * 3;
      image.data[off] = r;
      image.data[off + 1] = g;
      image.data[off + 2] = b;
    }
  }
}

function randomRect(size: number, rng: Rng): Rect {
  const w = rng.int(Math.floor(size * 0.5), Math.floor(size * 0.75));
  const h = rng.int(Math.floor(size * 0.5), Math.floor(size * 0.75));
  return { x0: rng.int(0, size - w), y0: rng.int(0, size - h), w, h };
}

export function paintedRect(seed: string, itemId: string, size = IMAGE_SIZE): Rect {
  // same draw order as generateFixtures uses for a normal image
  return randomRect(size, new Rng(`${seed}:${itemId}:rect`));
}

export function generateFixtures(
  dir: string,
  split: "real" | "generated",
  seed: string,
): FixtureInfo {
  for (let i = 0; i < CLASSES.length; i++) {
    for (let j = i + 1; j < CLASSES.length; j++) {
      const d = hueDistance(promptHue(CLASSES[i]), promptHue(CLASSES[j]));
      if (d < 60) throw new Error(`fixture classes ${CLASSES[i]}/${CLASSES[j]} hues ${d} apart`);
    }
  }
  const imageRoot = join(dir, `${split}-images`);
  mkdirSync(imageRoot, { recursive: true });

  const entries: IndexEntry[] = [];
  const blankIds: string[] = [];
  let fullFrameId = "";
  let multiInstanceId = "";
  let smallImageId = "";
  const tag = split === "real" ? "r" : "g";

  for (const region of REGIONS) {
    for (const cls of CLASSES) {
      for (let idx = 0; idx < 5; idx++) {
        const itemId = `${tag}-${region}-${cls}-${idx}`;
        const blank = idx === 2 && ((region === "Africa" && cls === "bag") ||
                                    (region === "Europe" && cls === "cab"));
        const fullFrame = idx === 3 && region === "Africa" && cls === "cab";
        const multi = idx === 3 && region === "Europe" && cls === "bag";
        const small = idx === 4 && region === "Europe" && cls === "bag";
        const size = small ? 112 : IMAGE_SIZE;

        const image = grayBackground(size, new Rng(`${seed}:${itemId}:bg`));
        const hue = promptHue(cls);
        if (fullFrame) {
          paintRect(image, { x0: 0, y0: 0, w: size, h: size }, hue,
                    new Rng(`${seed}:${itemId}:paint`));
          fullFrameId = itemId;
        } else if (multi) {
          const s = Math.floor(size * 0.3);
          paintRect(image, { x0: 0, y0: 0, w: s, h: s }, hue,
                    new Rng(`${seed}:${itemId}:paint`));
          paintRect(image, { x0: size - s, y0: size - s, w: s, h: s }, hue,
                    new Rng(`${seed}:${itemId}:paint2`));
          multiInstanceId = itemId;
        } else if (!blank) {
          const rect = randomRect(size, new Rng(`${seed}:${itemId}:rect`));
          paintRect(image, rect, hue, new Rng(`${seed}:${itemId}:paint`));
        } else {
          blankIds.push(itemId);
        }
        if (small) smallImageId = itemId;

        const file = `${itemId}.ppm`;
        writeFileSync(join(imageRoot, file), encodePpm(image));
        entries.push({ item_id: itemId, region, object_class: cls, file });
      }
    }
  }

  const indexPath = join(dir, `${split}-index.jsonl`);
  writeFileSync(
    indexPath,
    entries.map((e) => JSON.stringify(e)).join("\n") + "\n",
  );
  return { imageRoot, indexPath, entries, blankIds, fullFrameId, multiInstanceId, smallImageId };
}
