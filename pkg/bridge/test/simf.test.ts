import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { encodeFeatureStore, writeFeatureStore } from "../src/simf.js";

let dir: string;
beforeEach(() => {
  dir = mkdtempSync(path.join(tmpdir(), "simf-"));
});
afterEach(() => {
  rmSync(dir, { recursive: true, force: true });
});

describe("feature store encoding", () => {
  it("matches the golden byte layout", () => {
    // 1 record, dim 2, label 7, values (1.0, -0.5): hand-encoded LE bytes.
    const got = encodeFeatureStore([{ label: 7, features: Float32Array.from([1.0, -0.5]) }], 2);
    const expected = Buffer.concat([
      Buffer.from("SIMF", "ascii"),
      Buffer.from([1, 0, 0, 0]), // version u32
      Buffer.from([1, 0, 0, 0, 0, 0, 0, 0]), // count u64
      Buffer.from([2, 0, 0, 0]), // dim u32
      Buffer.from([1]), // label kind u8
      Buffer.from([7, 0, 0, 0]), // label i32
      Buffer.from([0x00, 0x00, 0x80, 0x3f]), // 1.0f
      Buffer.from([0x00, 0x00, 0x00, 0xbf]), // -0.5f
    ]);
    expect(got.equals(expected)).toBe(true);
  });

  it("is deterministic", () => {
    const records = [
      { label: 0, features: Float32Array.from([0.25, -3.5, 17]) },
      { label: 5, features: Float32Array.from([1e-7, 2.5, -0.125]) },
    ];
    expect(encodeFeatureStore(records, 3).equals(encodeFeatureStore(records, 3))).toBe(true);
  });

  it("sizes the file from the header arithmetic", () => {
    const records = Array.from({ length: 9 }, (_, i) => ({
      label: i,
      features: new Float32Array(5),
    }));
    expect(encodeFeatureStore(records, 5).length).toBe(21 + 9 * (4 + 4 * 5));
  });

  it("rejects malformed records", () => {
    expect(() => encodeFeatureStore([{ label: 0, features: new Float32Array(2) }], 3)).toThrow(
      /2 components/,
    );
    expect(() => encodeFeatureStore([{ label: 1.5, features: new Float32Array(1) }], 1)).toThrow(
      /i32/,
    );
    expect(() => encodeFeatureStore([], 0)).toThrow(/positive/);
  });
});

describe("feature store writing", () => {
  it("writes an ids sidecar only when ids differ from record indices", () => {
    const records = [
      { label: 0, features: Float32Array.from([1]) },
      { label: 1, features: Float32Array.from([2]) },
    ];
    const plain = path.join(dir, "plain.simf");
    writeFeatureStore(plain, records, 1, ["0", "1"]);
    expect(existsSync(`${plain}.ids`)).toBe(false);

    const named = path.join(dir, "named.simf");
    writeFeatureStore(named, records, 1, ["a/x.png", "b/y.png"]);
    expect(readFileSync(`${named}.ids`, "utf-8")).toBe("a/x.png\nb/y.png\n");
  });

  it("rejects mismatched id counts and embedded newlines", () => {
    const records = [{ label: 0, features: Float32Array.from([1]) }];
    expect(() => writeFeatureStore(path.join(dir, "n.simf"), records, 1, [])).toThrow(/0 ids/);
    expect(() =>
      writeFeatureStore(path.join(dir, "m.simf"), records, 1, ["bad\nid"]),
    ).toThrow(/newline/);
  });
});
