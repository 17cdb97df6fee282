import { mkdirSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { backboneOutputDim } from "../src/backbone.js";
import { exportFeatures, validateConfig, type ExportConfig } from "../src/export.js";
import { parseStore, writeClassImage } from "./helpers.js";

let dir: string;
beforeEach(() => {
  dir = mkdtempSync(path.join(tmpdir(), "export-"));
});
afterEach(() => {
  rmSync(dir, { recursive: true, force: true });
});

function config(imageRoot: string, overrides: Partial<ExportConfig> = {}): ExportConfig {
  return {
    imageRoot,
    backbone: "micro",
    pooling: "max",
    outputDim: backboneOutputDim("micro"),
    l2Normalize: true,
    labelRule: "parent-directory",
    maxSide: 1024,
    ...overrides,
  };
}

describe("config validation", () => {
  it("requires the dim to match the backbone channel count", () => {
    expect(() => validateConfig(config(dir, { outputDim: 7 }))).toThrow(/channel count/);
    expect(() => validateConfig(config(dir, { backbone: "nope" }))).toThrow(/unknown backbone/);
    expect(() => validateConfig(config(dir, { maxSide: -1 }))).toThrow(/max side/);
  });
});

describe("directory export", () => {
  it("labels 3 images across 2 directories as 2 classes", () => {
    writeClassImage(path.join(dir, "imgs/ants/a.png"), 0, 1);
    writeClassImage(path.join(dir, "imgs/ants/b.png"), 0, 2);
    writeClassImage(path.join(dir, "imgs/bees/c.png"), 1, 3);
    const out = path.join(dir, "store.simf");
    const summary = exportFeatures(config(path.join(dir, "imgs")), out);

    expect(summary.count).toBe(3);
    expect(summary.skipped).toBe(0);
    expect(summary.classHistogram).toEqual({ ants: 2, bees: 1 });

    const store = parseStore(readFileSync(out));
    expect(store.count).toBe(3);
    expect(store.dim).toBe(backboneOutputDim("micro"));
    expect(store.labels).toEqual([0, 0, 1]); // sorted paths: ants/a, ants/b, bees/c
    expect(readFileSync(`${out}.ids`, "utf-8")).toBe("ants/a.png\nants/b.png\nbees/c.png\n");
  });

  it("produces unit-norm vectors within 1e-5 when normalization is on", () => {
    for (let i = 0; i < 4; i++) {
      writeClassImage(path.join(dir, "imgs", `cls${i % 2}`, `img_${i}.png`), i % 2, 10 + i);
    }
    const out = path.join(dir, "store.simf");
    exportFeatures(config(path.join(dir, "imgs")), out);
    for (const vec of parseStore(readFileSync(out)).vectors) {
      const norm = Math.sqrt(vec.reduce((acc, v) => acc + v * v, 0));
      expect(Math.abs(norm - 1)).toBeLessThan(1e-5);
    }
  });

  it("skips unreadable images with a warning and counts them", () => {
    writeClassImage(path.join(dir, "imgs/a/good.png"), 0, 1);
    writeFileSync(path.join(dir, "imgs/a/broken.png"), Buffer.from("not a png at all"));
    const warnings: string[] = [];
    const out = path.join(dir, "store.simf");
    const summary = exportFeatures(config(path.join(dir, "imgs")), out, (m) => warnings.push(m));

    expect(summary.count).toBe(1);
    expect(summary.skipped).toBe(1);
    expect(warnings).toHaveLength(1);
    expect(warnings[0]).toMatch(/broken\.png/);
    expect(readFileSync(`${out}.ids`, "utf-8")).toBe("a/good.png\n");
  });

  it("fails when there is nothing exportable", () => {
    const empty = path.join(dir, "empty");
    mkdirSync(empty);
    expect(() => exportFeatures(config(empty), path.join(dir, "s.simf"))).toThrow(/no PNG images/);

    const broken = path.join(dir, "broken");
    mkdirSync(broken);
    writeFileSync(path.join(broken, "x.png"), Buffer.from("garbage"));
    expect(() =>
      exportFeatures(config(broken), path.join(dir, "s2.simf"), () => {}),
    ).toThrow(/unreadable/);
  });

  it("is deterministic across runs", () => {
    for (let i = 0; i < 3; i++) {
      writeClassImage(path.join(dir, "imgs/c/img_" + i + ".png"), i, 30 + i);
    }
    const out1 = path.join(dir, "s1.simf");
    const out2 = path.join(dir, "s2.simf");
    exportFeatures(config(path.join(dir, "imgs")), out1);
    exportFeatures(config(path.join(dir, "imgs")), out2);
    expect(readFileSync(out1).equals(readFileSync(out2))).toBe(true);
  });

  it("supports the filename-prefix rule and average pooling", () => {
    writeClassImage(path.join(dir, "imgs/cat_1.png"), 0, 1);
    writeClassImage(path.join(dir, "imgs/cat_2.png"), 0, 2);
    writeClassImage(path.join(dir, "imgs/dog_1.png"), 1, 3);
    const out = path.join(dir, "store.simf");
    const summary = exportFeatures(
      config(path.join(dir, "imgs"), { labelRule: "filename-prefix", pooling: "avg" }),
      out,
    );
    expect(summary.classHistogram).toEqual({ cat: 2, dog: 1 });

    // Max and average pooling disagree on generic inputs.
    const outMax = path.join(dir, "store-max.simf");
    exportFeatures(config(path.join(dir, "imgs"), { labelRule: "filename-prefix" }), outMax);
    expect(readFileSync(out).equals(readFileSync(outMax))).toBe(false);
  });

  it("downscales oversized images instead of failing", () => {
    writeClassImage(path.join(dir, "imgs/a/big.png"), 0, 1, 48);
    writeClassImage(path.join(dir, "imgs/a/small.png"), 0, 2, 16);
    const out = path.join(dir, "store.simf");
    const summary = exportFeatures(config(path.join(dir, "imgs"), { maxSide: 32 }), out);
    expect(summary.count).toBe(2);
    for (const vec of parseStore(readFileSync(out)).vectors) {
      expect(vec.some((v) => v !== 0)).toBe(true);
    }
  });
});
