/**
 * Directory-to-feature-store export: walk an image root, run every readable
 * PNG through the named backbone, and write one labeled record per image.
 */

import path from "node:path";

import { Backbone, backboneOutputDim, type Pooling } from "./backbone.js";
import { decodeImage, listImages } from "./images.js";
import { assignLabels, classOf, type LabelRule } from "./labels.js";
import { writeFeatureStore, type FeatureRecord } from "./simf.js";

export interface ExportConfig {
  imageRoot: string;
  backbone: string;
  pooling: Pooling;
  /** Feature dimension; must equal the backbone's final channel count. */
  outputDim: number;
  l2Normalize: boolean;
  labelRule: LabelRule;
  /** Cap on the longer image side before feature extraction; 0 disables. */
  maxSide: number;
}

export const DEFAULT_MAX_SIDE = 1024;

export interface ExportSummary {
  count: number;
  dim: number;
  classHistogram: Record<string, number>;
  skipped: number;
  out: string;
}

export function validateConfig(cfg: ExportConfig): void {
  const expected = backboneOutputDim(cfg.backbone);
  if (cfg.outputDim !== expected) {
    throw new Error(
      `output dim ${cfg.outputDim} does not match backbone ` +
        `${JSON.stringify(cfg.backbone)} channel count ${expected}`,
    );
  }
  if (cfg.maxSide < 0) {
    throw new Error(`max side must be >= 0, got ${cfg.maxSide}`);
  }
}

export function exportFeatures(
  cfg: ExportConfig,
  outPath: string,
  warn: (message: string) => void = (m) => console.warn(m),
): ExportSummary {
  validateConfig(cfg);
  const relPaths = listImages(cfg.imageRoot);
  if (relPaths.length === 0) {
    throw new Error(`no PNG images found under ${cfg.imageRoot}`);
  }

  const backbone = new Backbone(cfg.backbone);
  try {
    const kept: string[] = [];
    const vectors: Float32Array[] = [];
    let skipped = 0;
    for (const rel of relPaths) {
      let decoded;
      try {
        decoded = decodeImage(path.join(cfg.imageRoot, rel));
      } catch (err) {
        warn(`skipping unreadable image ${rel}: ${err instanceof Error ? err.message : err}`);
        skipped += 1;
        continue;
      }
      kept.push(rel);
      vectors.push(backbone.extract(decoded, cfg.pooling, cfg.l2Normalize, cfg.maxSide));
    }
    if (kept.length === 0) {
      throw new Error(`all ${relPaths.length} images under ${cfg.imageRoot} were unreadable`);
    }

    const classes = kept.map((rel) => classOf(rel, cfg.labelRule));
    const labelOf = assignLabels(classes);
    const histogram: Record<string, number> = {};
    for (const name of [...labelOf.keys()]) {
      histogram[name] = 0;
    }
    const records: FeatureRecord[] = kept.map((rel, i) => {
      const name = classes[i]!;
      histogram[name]! += 1;
      return { label: labelOf.get(name)!, features: vectors[i]! };
    });

    writeFeatureStore(outPath, records, cfg.outputDim, kept);
    return {
      count: records.length,
      dim: cfg.outputDim,
      classHistogram: histogram,
      skipped,
      out: outPath,
    };
  } finally {
    backbone.dispose();
  }
}
