/** Figure specifications: which CSV columns to plot, per-series row
 * filters, and reference slope guide lines. */

import { readFileSync } from "node:fs";
import { SchemaError, Table, requireColumns } from "./csv.js";

export interface SeriesSpec {
  label: string;
  filter?: Record<string, string>;
}

export interface FigureSpec {
  input: string;
  x: string;
  y: string;
  series: SeriesSpec[];
  guides?: number[];
  title?: string;
  xlabel?: string;
  ylabel?: string;
  annotate_slopes?: boolean;
}

export function loadFigureSpec(path: string): FigureSpec {
  const spec = JSON.parse(readFileSync(path, "utf-8")) as FigureSpec;
  for (const key of ["input", "x", "y", "series"] as const) {
    if (spec[key] === undefined) {
      throw new SchemaError(`figure spec misses field '${key}'`);
    }
  }
  if (!Array.isArray(spec.series) || spec.series.length === 0) {
    throw new SchemaError("figure spec needs at least one series");
  }
  return spec;
}

export interface SeriesData {
  label: string;
  points: Array<[number, number]>;
}

export function extractSeries(table: Table, spec: FigureSpec): SeriesData[] {
  requireColumns(table, [spec.x, spec.y]);
  for (const s of spec.series) {
    requireColumns(table, Object.keys(s.filter ?? {}));
  }
  return spec.series.map((s) => {
    const rows = table.rows.filter((row) =>
      Object.entries(s.filter ?? {}).every(([k, v]) => row[k] === v),
    );
    const points = rows
      .filter((row) => row[spec.x] !== "" && row[spec.y] !== "")
      .map((row): [number, number] => [Number(row[spec.x]), Number(row[spec.y])]);
    if (points.length === 0) {
      throw new SchemaError(`series '${s.label}' selects no data rows`);
    }
    if (points.some(([x, y]) => !Number.isFinite(x) || !Number.isFinite(y))) {
      throw new SchemaError(`series '${s.label}' has non-numeric cells`);
    }
    if (points.some(([x, y]) => x <= 0 || y <= 0)) {
      throw new SchemaError(
        `series '${s.label}' has non-positive values (log-log axes)`,
      );
    }
    points.sort((a, b) => a[0] - b[0]);
    return { label: s.label, points };
  });
}
