/**
 * Class labeling rules for image files, applied to paths relative to the
 * image root.
 *
 * - "parent-directory": the class is the immediate parent directory name
 *   (files sitting directly in the root share the class ".").
 * - "filename-prefix": the class is the file stem up to the first
 *   underscore ("cat_001.png" -> "cat"; no underscore keeps the whole stem).
 */

import path from "node:path";

export type LabelRule = "parent-directory" | "filename-prefix";

export const LABEL_RULES: readonly LabelRule[] = ["parent-directory", "filename-prefix"];

export function classOf(relPath: string, rule: LabelRule): string {
  const normalized = relPath.split(path.sep).join("/");
  if (rule === "parent-directory") {
    const dir = path.posix.dirname(normalized);
    return dir === "." ? "." : path.posix.basename(dir);
  }
  const stem = path.posix.basename(normalized).replace(/\.[^.]*$/, "");
  const cut = stem.indexOf("_");
  return cut === -1 ? stem : stem.slice(0, cut);
}

/** Map class names to dense integer labels, alphabetically for determinism. */
export function assignLabels(classes: string[]): Map<string, number> {
  const unique = [...new Set(classes)].sort();
  return new Map(unique.map((name, i) => [name, i]));
}
