/**
 * Writer for the toolkit's binary feature-store format.
 *
 * Layout (little-endian): magic "SIMF", u32 version (1), u64 record count,
 * u32 feature dim, u8 label kind (1 = labeled). Each record is an i32 class
 * label followed by `dim` float32 components. String record ids, when they
 * differ from plain record indices, go to a `<path>.ids` sidecar with one id
 * per line.
 */

import { writeFileSync } from "node:fs";

export const FEATURE_MAGIC = "SIMF";
export const FEATURE_VERSION = 1;
export const HEADER_BYTES = 21;

export interface FeatureRecord {
  label: number;
  features: Float32Array;
}

export function encodeFeatureStore(records: FeatureRecord[], dim: number): Buffer {
  if (!Number.isInteger(dim) || dim < 1) {
    throw new Error(`feature dim must be a positive integer, got ${dim}`);
  }
  for (const [i, rec] of records.entries()) {
    if (rec.features.length !== dim) {
      throw new Error(`record ${i} has ${rec.features.length} components, expected ${dim}`);
    }
    if (!Number.isInteger(rec.label) || rec.label < -2147483648 || rec.label > 2147483647) {
      throw new Error(`record ${i} label ${rec.label} does not fit an i32`);
    }
  }

  const recordBytes = 4 + 4 * dim;
  const buf = Buffer.alloc(HEADER_BYTES + records.length * recordBytes);
  buf.write(FEATURE_MAGIC, 0, "ascii");
  buf.writeUInt32LE(FEATURE_VERSION, 4);
  buf.writeBigUInt64LE(BigInt(records.length), 8);
  buf.writeUInt32LE(dim, 16);
  buf.writeUInt8(1, 20);

  let offset = HEADER_BYTES;
  for (const rec of records) {
    buf.writeInt32LE(rec.label, offset);
    offset += 4;
    for (let k = 0; k < dim; k++) {
      buf.writeFloatLE(rec.features[k]!, offset);
      offset += 4;
    }
  }
  return buf;
}

export function writeFeatureStore(
  path: string,
  records: FeatureRecord[],
  dim: number,
  ids?: string[],
): void {
  if (ids !== undefined && ids.length !== records.length) {
    throw new Error(`${ids.length} ids for ${records.length} records`);
  }
  writeFileSync(path, encodeFeatureStore(records, dim));
  if (ids !== undefined && !ids.every((id, i) => id === String(i))) {
    for (const id of ids) {
      if (id.includes("\n")) {
        throw new Error(`record id ${JSON.stringify(id)} contains a newline`);
      }
    }
    writeFileSync(`${path}.ids`, ids.map((id) => `${id}\n`).join(""), "utf-8");
  }
}
