import seedrandom from "seedrandom";

/** Deterministic random stream; same seed string, same sequence. */
export class Rng {
  private readonly prng: seedrandom.PRNG;
  private spare: number | null = null;

  constructor(seed: string) {
    this.prng = seedrandom(seed);
  }

  /** Uniform double in [0, 1). */
  uniform(): number {
    return this.prng();
  }

  /** Uniform integer in [lo, hi] inclusive. */
  int(lo: number, hi: number): number {
    return lo + Math.floor(this.prng() * (hi - lo + 1));
  }

  /** Standard normal via Box-Muller; caches the second variate. */
  gauss(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    while (u === 0) u = this.prng(); // log(0) guard
    const r = Math.sqrt(-2 * Math.log(u));
    const theta = 2 * Math.PI * this.prng();
    this.spare = r * Math.sin(theta);
    return r * Math.cos(theta);
  }

  /** Float64Array of iid N(0, stddev^2) draws. */
  gaussArray(n: number, stddev: number): Float64Array {
    const out = new Float64Array(n);
    for (let i = 0; i < n; i++) out[i] = this.gauss() * stddev;
    return out;
  }
}

/** FNV-1a 32-bit hash; stable across runs and platforms. */
export function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}
