#!/usr/bin/env node
/**
 * Command line for the image-to-feature-store exporter.
 *
 * Exit codes follow the toolkit convention: 0 success, 1 runtime failure
 * (unreadable root, no exportable images), 2 usage error (unknown flags or
 * subcommands, bad flag values, dim/backbone mismatch).
 */

import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { BACKBONES, backboneOutputDim, type Pooling } from "./backbone.js";
import { DEFAULT_MAX_SIDE, exportFeatures, validateConfig, type ExportConfig } from "./export.js";
import { LABEL_RULES, type LabelRule } from "./labels.js";

class UsageError extends Error {}

const USAGE = `usage: simnet-bridge export --images DIR --out FILE [options]

Extract one feature vector per PNG image under DIR into a binary feature
store readable by the Python toolkit, labeled per --label-rule.

options:
  --images DIR        image root directory (required)
  --out FILE          output store path (required)
  --backbone NAME     ${Object.keys(BACKBONES).join(" | ")} (default base)
  --pooling MODE      max | avg (default max)
  --dim N             feature dim; must match the backbone (default: backbone's)
  --no-normalize      skip L2 normalization of feature vectors
  --label-rule RULE   ${LABEL_RULES.join(" | ")} (default parent-directory)
  --max-side N        downscale so the longer side fits N pixels; 0 = never
                      (default ${DEFAULT_MAX_SIDE})
  --help              show this message
`;

function parsePositiveInt(value: string, flag: string, minimum: number): number {
  const n = Number(value);
  if (!Number.isInteger(n) || n < minimum) {
    throw new UsageError(`${flag} must be an integer >= ${minimum}, got ${JSON.stringify(value)}`);
  }
  return n;
}

interface ParsedExport {
  cfg: ExportConfig;
  out: string;
}

function parseExportArgs(args: string[]): ParsedExport | "help" {
  let values: ReturnType<typeof parseArgs>["values"];
  let positionals: string[];
  try {
    ({ values, positionals } = parseArgs({
      args,
      options: {
        images: { type: "string" },
        out: { type: "string" },
        backbone: { type: "string", default: "base" },
        pooling: { type: "string", default: "max" },
        dim: { type: "string" },
        "no-normalize": { type: "boolean", default: false },
        "label-rule": { type: "string", default: "parent-directory" },
        "max-side": { type: "string", default: String(DEFAULT_MAX_SIDE) },
        help: { type: "boolean", default: false },
      },
      allowPositionals: true,
    }));
  } catch (err) {
    throw new UsageError(err instanceof Error ? err.message : String(err));
  }
  if (values.help) {
    return "help";
  }
  if (positionals.length > 0) {
    throw new UsageError(`unexpected arguments: ${positionals.join(" ")}`);
  }
  if (typeof values.images !== "string" || values.images === "") {
    throw new UsageError("--images is required");
  }
  if (typeof values.out !== "string" || values.out === "") {
    throw new UsageError("--out is required");
  }

  const backbone = values.backbone as string;
  if (!(backbone in BACKBONES)) {
    throw new UsageError(
      `unknown backbone ${JSON.stringify(backbone)}; available: ${Object.keys(BACKBONES).join(", ")}`,
    );
  }
  const pooling = values.pooling as string;
  if (pooling !== "max" && pooling !== "avg") {
    throw new UsageError(`pooling must be "max" or "avg", got ${JSON.stringify(pooling)}`);
  }
  const labelRule = values["label-rule"] as string;
  if (!(LABEL_RULES as readonly string[]).includes(labelRule)) {
    throw new UsageError(
      `label rule must be one of ${LABEL_RULES.join(", ")}, got ${JSON.stringify(labelRule)}`,
    );
  }

  const cfg: ExportConfig = {
    imageRoot: values.images,
    backbone,
    pooling: pooling as Pooling,
    outputDim:
      values.dim === undefined
        ? backboneOutputDim(backbone)
        : parsePositiveInt(values.dim as string, "--dim", 1),
    l2Normalize: !(values["no-normalize"] as boolean),
    labelRule: labelRule as LabelRule,
    maxSide: parsePositiveInt(values["max-side"] as string, "--max-side", 0),
  };
  try {
    validateConfig(cfg);
  } catch (err) {
    throw new UsageError(err instanceof Error ? err.message : String(err));
  }
  return { cfg, out: values.out };
}

export async function main(args: string[]): Promise<number> {
  try {
    const [command, ...rest] = args;
    if (command === undefined || command === "--help" || command === "-h") {
      process.stdout.write(USAGE);
      return command === undefined ? 2 : 0;
    }
    if (command !== "export") {
      throw new UsageError(`unknown subcommand ${JSON.stringify(command)}; expected "export"`);
    }
    const parsed = parseExportArgs(rest);
    if (parsed === "help") {
      process.stdout.write(USAGE);
      return 0;
    }

    const summary = exportFeatures(parsed.cfg, parsed.out, (m) => console.error(m));
    writeFileSync(`${parsed.out}.summary.json`, `${JSON.stringify(summary, null, 2)}\n`);
    console.log(
      `exported ${summary.count} images (${summary.skipped} skipped) ` +
        `to ${summary.out}: dim ${summary.dim}, ` +
        `${Object.keys(summary.classHistogram).length} classes`,
    );
    return 0;
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    if (err instanceof UsageError) {
      console.error(`usage error: ${message}`);
      console.error(USAGE);
      return 2;
    }
    console.error(`error: ${message}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
