/**
 * Image discovery and decoding. Only PNG files are considered exportable;
 * decoding failures are reported to the caller so exports can skip and
 * count them rather than abort.
 */

import { readFileSync, readdirSync } from "node:fs";
import path from "node:path";

import { PNG } from "pngjs";

export interface DecodedImage {
  /** Row-major RGB values scaled to [0, 1]. */
  pixels: Float32Array;
  height: number;
  width: number;
}

/** Recursively list PNG files under `root`, as sorted root-relative paths. */
export function listImages(root: string): string[] {
  const found: string[] = [];
  const walk = (dir: string) => {
    for (const entry of readdirSync(dir, { withFileTypes: true })) {
      const full = path.join(dir, entry.name);
      if (entry.isDirectory()) {
        walk(full);
      } else if (entry.isFile() && entry.name.toLowerCase().endsWith(".png")) {
        found.push(path.relative(root, full).split(path.sep).join("/"));
      }
    }
  };
  walk(root);
  return found.sort();
}

export function decodeImage(filePath: string): DecodedImage {
  const png = PNG.sync.read(readFileSync(filePath));
  const { width, height, data } = png;
  if (width < 1 || height < 1) {
    throw new Error(`image ${filePath} has empty dimensions ${width}x${height}`);
  }
  const pixels = new Float32Array(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    pixels[3 * p] = data[4 * p]! / 255;
    pixels[3 * p + 1] = data[4 * p + 1]! / 255;
    pixels[3 * p + 2] = data[4 * p + 2]! / 255;
  }
  return { pixels, height, width };
}
