/**
 * Deterministic convolutional feature extractor.
 *
 * Each named backbone is a fixed stack of stride-2 3x3 convolutions with
 * ReLU, whose weights come from a PRNG seeded by the backbone name — the
 * name alone pins every parameter, so exports are reproducible anywhere
 * without a weight download. The final convolutional map is collapsed to
 * one vector per image by global max pooling (the default, which favors
 * the strongest local activation per channel) or global average pooling,
 * optionally followed by L2 normalization.
 */

import * as tf from "@tensorflow/tfjs";

import type { DecodedImage } from "./images.js";

export type Pooling = "max" | "avg";

export interface BackbonePreset {
  convChannels: number[];
}

export const BACKBONES: Record<string, BackbonePreset> = {
  micro: { convChannels: [8, 16] },
  small: { convChannels: [16, 32] },
  base: { convChannels: [16, 32, 64] },
};

export function backboneOutputDim(name: string): number {
  const preset = BACKBONES[name];
  if (preset === undefined) {
    throw new Error(
      `unknown backbone ${JSON.stringify(name)}; available: ${Object.keys(BACKBONES).join(", ")}`,
    );
  }
  return preset.convChannels[preset.convChannels.length - 1]!;
}

/** Deterministic 32-bit PRNG (mulberry32) returning floats in [0, 1). */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function hashName(name: string): number {
  let h = 2166136261;
  for (let i = 0; i < name.length; i++) {
    h = Math.imul(h ^ name.charCodeAt(i), 16777619);
  }
  return h >>> 0;
}

/** He-scaled standard normals via Box-Muller on the seeded stream. */
function seededNormals(rand: () => number, n: number, scale: number): Float32Array {
  const out = new Float32Array(n);
  for (let i = 0; i < n; i += 2) {
    const u = Math.max(rand(), 1e-12);
    const v = rand();
    const r = Math.sqrt(-2 * Math.log(u));
    out[i] = r * Math.cos(2 * Math.PI * v) * scale;
    if (i + 1 < n) {
      out[i + 1] = r * Math.sin(2 * Math.PI * v) * scale;
    }
  }
  return out;
}

interface ConvLayer {
  kernel: tf.Tensor4D;
  bias: tf.Tensor1D;
}

export class Backbone {
  readonly name: string;
  readonly outputDim: number;
  private readonly layers: ConvLayer[];

  constructor(name: string) {
    const preset = BACKBONES[name];
    if (preset === undefined) {
      throw new Error(
        `unknown backbone ${JSON.stringify(name)}; available: ${Object.keys(BACKBONES).join(", ")}`,
      );
    }
    this.name = name;
    this.outputDim = backboneOutputDim(name);
    const rand = mulberry32(hashName(name));
    this.layers = [];
    let inChannels = 3;
    for (const outChannels of preset.convChannels) {
      const fanIn = 3 * 3 * inChannels;
      const kernel = tf.tensor4d(
        seededNormals(rand, 3 * 3 * inChannels * outChannels, Math.sqrt(2 / fanIn)),
        [3, 3, inChannels, outChannels],
      );
      const bias = tf.tensor1d(new Float32Array(outChannels));
      this.layers.push({ kernel, bias });
      inChannels = outChannels;
    }
  }

  /**
   * One feature vector for one image. `maxSide` caps the longer image side
   * by bilinear downscaling before the conv stack; 0 disables rescaling.
   */
  extract(image: DecodedImage, pooling: Pooling, l2Normalize: boolean, maxSide: number): Float32Array {
    const result = tf.tidy(() => {
      let x: tf.Tensor4D = tf
        .tensor3d(image.pixels, [image.height, image.width, 3])
        .expandDims(0);
      const longer = Math.max(image.height, image.width);
      if (maxSide > 0 && longer > maxSide) {
        const scale = maxSide / longer;
        x = tf.image.resizeBilinear(x, [
          Math.max(1, Math.round(image.height * scale)),
          Math.max(1, Math.round(image.width * scale)),
        ]);
      }
      for (const layer of this.layers) {
        x = tf.relu(tf.add(tf.conv2d(x, layer.kernel, 2, "same"), layer.bias));
      }
      let pooled = pooling === "max" ? tf.max(x, [1, 2]) : tf.mean(x, [1, 2]);
      if (l2Normalize) {
        const norm = tf.norm(pooled, "euclidean", 1, true);
        pooled = tf.div(pooled, tf.maximum(norm, 1e-12));
      }
      return pooled.squeeze([0]);
    });
    const data = result.dataSync() as Float32Array;
    result.dispose();
    return Float32Array.from(data);
  }

  dispose(): void {
    for (const layer of this.layers) {
      layer.kernel.dispose();
      layer.bias.dispose();
    }
  }
}
