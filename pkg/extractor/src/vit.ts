import { RgbImage } from "./netpbm.js";
import { Rng } from "./rng.js";

/**
 * Small deterministic vision transformer. Weights are drawn from a seeded
 * RNG at construction, so the same seed always yields the same model and
 * inference is bit-reproducible. This is a stand-in for a pretrained
 * ViT-Base encoder; downstream reports carry the model block emitted by
 * the pipeline so consumers can tell which encoder produced a dataset.
 *
 * Patch attention masking: a masked patch's key/value column is excluded
 * from every layer's attention, which is equivalent to forcing its
 * post-softmax attention score to zero. Because the column is skipped
 * outright, the content of masked patches cannot influence any other
 * token, bit for bit. The CLS token is never masked.
 */

export interface ModelConfig {
  imageSize: number;
  patchSize: number;
  dim: number;
  layers: number;
  heads: number;
  seed: string;
}

export const DEFAULT_MODEL: ModelConfig = {
  imageSize: 224,
  patchSize: 16,
  dim: 32,
  layers: 2,
  heads: 4,
  seed: "tiny-vit-v1",
};

const WEIGHT_STD = 0.02;
const LN_EPS = 1e-5;
const MLP_RATIO = 4;

interface Block {
  ln1g: Float64Array;
  ln1b: Float64Array;
  wq: Float64Array;
  wk: Float64Array;
  wv: Float64Array;
  wo: Float64Array;
  ln2g: Float64Array;
  ln2b: Float64Array;
  w1: Float64Array;
  b1: Float64Array;
  w2: Float64Array;
  b2: Float64Array;
}

function ones(n: number): Float64Array {
  return new Float64Array(n).fill(1);
}

/** out[t] = x[t] . w (w is inDim x outDim, row-major) + b */
function matmulRows(
  x: Float64Array,
  rows: number,
  inDim: number,
  w: Float64Array,
  outDim: number,
  b: Float64Array | null,
  out: Float64Array,
): void {
  for (let t = 0; t < rows; t++) {
    const xOff = t * inDim;
    const oOff = t * outDim;
    for (let o = 0; o < outDim; o++) out[oOff + o] = b ? b[o] : 0;
    for (let i = 0; i < inDim; i++) {
      const xv = x[xOff + i];
      if (xv === 0) continue;
      const wOff = i * outDim;
      for (let o = 0; o < outDim; o++) out[oOff + o] += xv * w[wOff + o];
    }
  }
}

function layerNorm(
  x: Float64Array,
  rows: number,
  dim: number,
  gamma: Float64Array,
  beta: Float64Array,
  out: Float64Array,
): void {
  for (let t = 0; t < rows; t++) {
    const off = t * dim;
    let mean = 0;
    for (let d = 0; d < dim; d++) mean += x[off + d];
    mean /= dim;
    let variance = 0;
    for (let d = 0; d < dim; d++) {
      const c = x[off + d] - mean;
      variance += c * c;
    }
    variance /= dim;
    const inv = 1 / Math.sqrt(variance + LN_EPS);
    for (let d = 0; d < dim; d++) {
      out[off + d] = (x[off + d] - mean) * inv * gamma[d] + beta[d];
    }
  }
}

function gelu(v: number): number {
  // tanh approximation, standard transformer formulation
  const c = Math.sqrt(2 / Math.PI);
  return 0.5 * v * (1 + Math.tanh(c * (v + 0.044715 * v * v * v)));
}

export class TinyVit {
  readonly config: ModelConfig;
  readonly grid: number;
  readonly numPatches: number;
  readonly tokens: number;
  private readonly patchDim: number;
  private readonly headDim: number;
  private readonly patchW: Float64Array;
  private readonly patchB: Float64Array;
  private readonly cls: Float64Array;
  private readonly pos: Float64Array;
  private readonly blocks: Block[];
  private readonly lnFg: Float64Array;
  private readonly lnFb: Float64Array;

  constructor(config: ModelConfig = DEFAULT_MODEL) {
    if (config.imageSize % config.patchSize !== 0) {
      throw new RangeError(
        `image size ${config.imageSize} not divisible by patch size ${config.patchSize}`,
      );
    }
    if (config.dim % config.heads !== 0) {
      throw new RangeError(`dim ${config.dim} not divisible by heads ${config.heads}`);
    }
    this.config = config;
    this.grid = config.imageSize / config.patchSize;
    this.numPatches = this.grid * this.grid;
    this.tokens = this.numPatches + 1;
    this.patchDim = config.patchSize * config.patchSize * 3;
    this.headDim = config.dim / config.heads;

    // fixed draw order keeps a seed's weights stable across versions
    const rng = new Rng(config.seed);
    const d = config.dim;
    this.patchW = rng.gaussArray(this.patchDim * d, WEIGHT_STD);
    this.patchB = new Float64Array(d);
    this.cls = rng.gaussArray(d, WEIGHT_STD);
    this.pos = rng.gaussArray(this.tokens * d, WEIGHT_STD);
    this.blocks = [];
    for (let layer = 0; layer < config.layers; layer++) {
      this.blocks.push({
        ln1g: ones(d),
        ln1b: new Float64Array(d),
        wq: rng.gaussArray(d * d, WEIGHT_STD),
        wk: rng.gaussArray(d * d, WEIGHT_STD),
        wv: rng.gaussArray(d * d, WEIGHT_STD),
        wo: rng.gaussArray(d * d, WEIGHT_STD),
        ln2g: ones(d),
        ln2b: new Float64Array(d),
        w1: rng.gaussArray(d * MLP_RATIO * d, WEIGHT_STD),
        b1: new Float64Array(MLP_RATIO * d),
        w2: rng.gaussArray(MLP_RATIO * d * d, WEIGHT_STD),
        b2: new Float64Array(d),
      });
    }
    this.lnFg = ones(d);
    this.lnFb = new Float64Array(d);
  }

  /** Token index of patch (row, col); token 0 is CLS. */
  tokenIndex(row: number, col: number): number {
    return 1 + row * this.grid + col;
  }

  /**
   * CLS feature of the last layer. `zeroedPatches` lists (row, col) grid
   * cells whose attention is zeroed at every layer; an empty list is the
   * unmasked forward pass, byte-identical to not masking at all.
   */
  forward(image: RgbImage, zeroedPatches: ReadonlyArray<readonly [number, number]>): Float32Array {
    const { imageSize, patchSize, dim, heads } = this.config;
    if (image.width !== imageSize || image.height !== imageSize) {
      throw new RangeError(
        `expected ${imageSize}x${imageSize} input, got ${image.width}x${image.height}`,
      );
    }
    const T = this.tokens;

    const masked = new Set<number>();
    for (const [r, c] of zeroedPatches) {
      if (r < 0 || r >= this.grid || c < 0 || c >= this.grid) {
        throw new RangeError(`patch (${r}, ${c}) outside ${this.grid}x${this.grid} grid`);
      }
      masked.add(this.tokenIndex(r, c));
    }
    const active: number[] = [];
    for (let t = 0; t < T; t++) if (!masked.has(t)) active.push(t);

    // patch embedding + CLS + positions
    const x = new Float64Array(T * dim);
    const patch = new Float64Array(this.patchDim);
    for (let pr = 0; pr < this.grid; pr++) {
      for (let pc = 0; pc < this.grid; pc++) {
        let w = 0;
        for (let dy = 0; dy < patchSize; dy++) {
          const y = pr * patchSize + dy;
          for (let dx = 0; dx < patchSize; dx++) {
            const src = (y * imageSize + pc * patchSize + dx) * 3;
            patch[w++] = image.data[src] / 255;
            patch[w++] = image.data[src + 1] / 255;
            patch[w++] = image.data[src + 2] / 255;
          }
        }
        const tok = this.tokenIndex(pr, pc);
        const off = tok * dim;
        for (let o = 0; o < dim; o++) x[off + o] = this.patchB[o];
        for (let i = 0; i < this.patchDim; i++) {
          const pv = patch[i];
          if (pv === 0) continue;
          const wOff = i * dim;
          for (let o = 0; o < dim; o++) x[off + o] += pv * this.patchW[wOff + o];
        }
      }
    }
    x.set(this.cls, 0);
    for (let i = 0; i < T * dim; i++) x[i] += this.pos[i];

    const h = new Float64Array(T * dim);
    const q = new Float64Array(T * dim);
    const k = new Float64Array(T * dim);
    const v = new Float64Array(T * dim);
    const ctx = new Float64Array(T * dim);
    const proj = new Float64Array(T * dim);
    const hidden = new Float64Array(T * MLP_RATIO * dim);
    const scores = new Float64Array(T);
    const scale = 1 / Math.sqrt(this.headDim);

    for (const block of this.blocks) {
      layerNorm(x, T, dim, block.ln1g, block.ln1b, h);
      matmulRows(h, T, dim, block.wq, dim, null, q);
      matmulRows(h, T, dim, block.wk, dim, null, k);
      matmulRows(h, T, dim, block.wv, dim, null, v);

      for (let head = 0; head < heads; head++) {
        const hd = head * this.headDim;
        for (let tq = 0; tq < T; tq++) {
          const qOff = tq * dim + hd;
          let maxScore = -Infinity;
          for (let ai = 0; ai < active.length; ai++) {
            const tk = active[ai];
            const kOff = tk * dim + hd;
            let s = 0;
            for (let e = 0; e < this.headDim; e++) s += q[qOff + e] * k[kOff + e];
            s *= scale;
            scores[ai] = s;
            if (s > maxScore) maxScore = s;
          }
          let denom = 0;
          for (let ai = 0; ai < active.length; ai++) {
            scores[ai] = Math.exp(scores[ai] - maxScore);
            denom += scores[ai];
          }
          const cOff = tq * dim + hd;
          for (let e = 0; e < this.headDim; e++) ctx[cOff + e] = 0;
          for (let ai = 0; ai < active.length; ai++) {
            const weight = scores[ai] / denom;
            const vOff = active[ai] * dim + hd;
            for (let e = 0; e < this.headDim; e++) ctx[cOff + e] += weight * v[vOff + e];
          }
        }
      }

      matmulRows(ctx, T, dim, block.wo, dim, null, proj);
      for (let i = 0; i < T * dim; i++) x[i] += proj[i];

      layerNorm(x, T, dim, block.ln2g, block.ln2b, h);
      matmulRows(h, T, dim, block.w1, MLP_RATIO * dim, block.b1, hidden);
      for (let i = 0; i < T * MLP_RATIO * dim; i++) hidden[i] = gelu(hidden[i]);
      matmulRows(hidden, T, MLP_RATIO * dim, block.w2, dim, block.b2, proj);
      for (let i = 0; i < T * dim; i++) x[i] += proj[i];
    }

    layerNorm(x, T, dim, this.lnFg, this.lnFb, h);
    return Float32Array.from(h.subarray(0, dim));
  }
}
