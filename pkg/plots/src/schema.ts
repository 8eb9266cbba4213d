/**
 * Trace CSV schema shared with the simulation engine.
 *
 * Every trace carries exactly these columns; sigma columns may be empty when
 * the run recorded no variance diagnostics.  A sidecar `<name>.json` next to
 * each CSV holds the resolved run config and problem constants.
 */

import { readFileSync } from "node:fs";

export const TRACE_COLUMNS = [
  "k",
  "f_gap",
  "dist2",
  "bits_up",
  "bits_down",
  "grad_evals",
  "sigma1_sq",
  "sigma2_sq",
] as const;

export type TraceColumn = (typeof TRACE_COLUMNS)[number];

export interface TraceRow {
  k: number;
  f_gap: number;
  dist2: number;
  bits_up: number;
  bits_down: number;
  grad_evals: number;
  sigma1_sq: number | null;
  sigma2_sq: number | null;
}

export interface RunManifest {
  config: Record<string, unknown>;
  problem: { name: string; n: number; m: number; [key: string]: unknown };
}

export class TraceSchemaError extends Error {}

export function parseTraceCsv(text: string, source = "<trace>"): TraceRow[] {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new TraceSchemaError(`${source}: empty file`);
  }
  const header = lines[0].split(",");
  const missing = TRACE_COLUMNS.filter((c) => !header.includes(c));
  const unexpected = header.filter(
    (h) => !(TRACE_COLUMNS as readonly string[]).includes(h),
  );
  if (missing.length > 0 || unexpected.length > 0) {
    throw new TraceSchemaError(
      `${source}: bad schema (missing [${missing.join(", ")}], ` +
        `unexpected [${unexpected.join(", ")}])`,
    );
  }
  const idx = new Map(header.map((h, i) => [h, i]));
  const rows: TraceRow[] = [];
  for (let li = 1; li < lines.length; li++) {
    const cells = lines[li].split(",");
    const num = (c: TraceColumn): number => {
      const v = Number(cells[idx.get(c)!]);
      if (!Number.isFinite(v)) {
        throw new TraceSchemaError(`${source}:${li + 1}: bad value in ${c}`);
      }
      return v;
    };
    const opt = (c: TraceColumn): number | null => {
      const raw = cells[idx.get(c)!];
      return raw === "" || raw === undefined ? null : Number(raw);
    };
    rows.push({
      k: num("k"),
      f_gap: num("f_gap"),
      dist2: num("dist2"),
      bits_up: num("bits_up"),
      bits_down: num("bits_down"),
      grad_evals: num("grad_evals"),
      sigma1_sq: opt("sigma1_sq"),
      sigma2_sq: opt("sigma2_sq"),
    });
  }
  if (rows.length === 0) {
    throw new TraceSchemaError(`${source}: no data rows`);
  }
  return rows;
}

export function readTraceCsv(path: string): TraceRow[] {
  return parseTraceCsv(readFileSync(path, "utf8"), path);
}

export function readManifest(csvPath: string): RunManifest | null {
  const sidecar = csvPath.replace(/\.csv$/, ".json");
  try {
    return JSON.parse(readFileSync(sidecar, "utf8")) as RunManifest;
  } catch {
    return null;
  }
}
