import { mkdirSync, writeFileSync } from "node:fs";
import path from "node:path";

import { PNG } from "pngjs";

/** Deterministic 32-bit PRNG for reproducible test images. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const CLASS_COLORS: ReadonlyArray<readonly [number, number, number]> = [
  [210, 50, 40],
  [40, 205, 60],
  [45, 60, 210],
  [205, 195, 40],
  [190, 45, 200],
];

/**
 * A small photo-like PNG whose dominant color and texture phase depend on
 * the class, with per-image noise on top.
 */
export function writeClassImage(
  filePath: string,
  classIdx: number,
  seed: number,
  size = 24,
): void {
  const png = new PNG({ width: size, height: size });
  const rand = mulberry32(seed);
  const base = CLASS_COLORS[classIdx % CLASS_COLORS.length]!;
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const i = (y * size + x) * 4;
      const texture = ((x >> 2) + (y >> 2) + classIdx) % 2 === 0 ? 28 : -28;
      for (let c = 0; c < 3; c++) {
        const noise = (rand() - 0.5) * 70;
        png.data[i + c] = Math.max(0, Math.min(255, Math.round(base[c]! + texture + noise)));
      }
      png.data[i + 3] = 255;
    }
  }
  mkdirSync(path.dirname(filePath), { recursive: true });
  writeFileSync(filePath, PNG.sync.write(png));
}

/** Parse a feature-store file: header plus one (label, vector) per record. */
export function parseStore(buf: Buffer): {
  count: number;
  dim: number;
  labels: number[];
  vectors: Float32Array[];
} {
  if (buf.subarray(0, 4).toString("ascii") !== "SIMF") {
    throw new Error("bad magic");
  }
  const count = Number(buf.readBigUInt64LE(8));
  const dim = buf.readUInt32LE(16);
  const labels: number[] = [];
  const vectors: Float32Array[] = [];
  let offset = 21;
  for (let r = 0; r < count; r++) {
    labels.push(buf.readInt32LE(offset));
    offset += 4;
    const vec = new Float32Array(dim);
    for (let k = 0; k < dim; k++) {
      vec[k] = buf.readFloatLE(offset);
      offset += 4;
    }
    vectors.push(vec);
  }
  return { count, dim, labels, vectors };
}
