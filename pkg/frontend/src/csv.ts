/**
 * Minimal CSV reading for the simulator's versioned output schemas.
 * The producer never quotes fields, so a plain split is exact.
 */

export interface Table {
  columns: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV");
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  for (const row of rows) {
    if (row.length !== columns.length) {
      throw new SchemaError(
        `row width ${row.length} != header width ${columns.length}`,
      );
    }
  }
  return { columns, rows };
}

export function requireColumns(table: Table, expected: string[]): void {
  const got = table.columns.join(",");
  const want = expected.join(",");
  if (got !== want) {
    throw new SchemaError(`columns [${got}] do not match schema [${want}]`);
  }
}

export function column(table: Table, name: string): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column ${name}`);
  }
  return table.rows.map((r) => r[idx]);
}
