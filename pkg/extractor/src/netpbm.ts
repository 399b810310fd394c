/**
 * Minimal netpbm codecs: binary P6 PPM for images, binary P5 PGM for masks.
 * Maxval is fixed at 255; P5 masks are further restricted to {0, 255} to
 * match the metrics CLI's mask contract.
 */

export class PbmError extends Error {}

export interface RgbImage {
  width: number;
  height: number;
  /** Interleaved RGB, row-major, 3 bytes per pixel. */
  data: Uint8Array;
}

export interface GrayImage {
  width: number;
  height: number;
  data: Uint8Array;
}

interface Header {
  width: number;
  height: number;
  payloadOffset: number;
}

function parseHeader(raw: Uint8Array, magic: string, where: string): Header {
  if (raw.length < 2 || String.fromCharCode(raw[0], raw[1]) !== magic) {
    throw new PbmError(`${where}: not a ${magic} netpbm file`);
  }
  let pos = 2;
  const isSpace = (b: number) => b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;

  const token = (): string => {
    while (pos < raw.length) {
      if (isSpace(raw[pos])) {
        pos++;
      } else if (raw[pos] === 0x23) { // '#' comment runs to end of line
        while (pos < raw.length && raw[pos] !== 0x0a) pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < raw.length && !isSpace(raw[pos])) pos++;
    if (start === pos) throw new PbmError(`${where}: truncated header`);
    return String.fromCharCode(...raw.subarray(start, pos));
  };

  const width = Number(token());
  const height = Number(token());
  const maxval = Number(token());
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new PbmError(`${where}: bad dimensions ${width}x${height}`);
  }
  if (maxval !== 255) {
    throw new PbmError(`${where}: maxval ${maxval}, only 255 supported`);
  }
  pos += 1; // single whitespace byte after maxval
  return { width, height, payloadOffset: pos };
}

export function decodePpm(raw: Uint8Array, where = "ppm"): RgbImage {
  const { width, height, payloadOffset } = parseHeader(raw, "P6", where);
  const expected = width * height * 3;
  const data = raw.subarray(payloadOffset);
  if (data.length !== expected) {
    throw new PbmError(`${where}: payload is ${data.length} bytes, expected ${expected}`);
  }
  return { width, height, data: new Uint8Array(data) };
}

export function encodePpm(image: RgbImage): Uint8Array {
  const header = `P6\n${image.width} ${image.height}\n255\n`;
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + image.data.length);
  out.set(head, 0);
  out.set(image.data, head.length);
  return out;
}

export function decodePgm(raw: Uint8Array, where = "pgm"): GrayImage {
  const { width, height, payloadOffset } = parseHeader(raw, "P5", where);
  const expected = width * height;
  const data = raw.subarray(payloadOffset);
  if (data.length !== expected) {
    throw new PbmError(`${where}: payload is ${data.length} bytes, expected ${expected}`);
  }
  return { width, height, data: new Uint8Array(data) };
}

/** Encode a binary mask; every byte must already be 0 or 255. */
export function encodePgm(mask: GrayImage): Uint8Array {
  for (let i = 0; i < mask.data.length; i++) {
    const v = mask.data[i];
    if (v !== 0 && v !== 255) {
      throw new PbmError(`mask byte ${v} at offset ${i}; only 0 and 255 allowed`);
    }
  }
  const header = `P5\n${mask.width} ${mask.height}\n255\n`;
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + mask.data.length);
  out.set(head, 0);
  out.set(mask.data, head.length);
  return out;
}
