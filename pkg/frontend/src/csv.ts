/** Minimal CSV reader for the study output schemas (no quoting needed). */

import { readFileSync } from "node:fs";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV");
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => {
    const cells = line.split(",");
    const row: Record<string, string> = {};
    columns.forEach((c, i) => {
      row[c] = cells[i] ?? "";
    });
    return row;
  });
  return { columns, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(
        `column '${name}' missing from CSV (have: ${table.columns.join(", ")})`,
      );
    }
  }
}
