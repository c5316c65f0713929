import { readFileSync } from "node:fs";
import Papa from "papaparse";
import { InputError, SchemaError } from "./schema.js";

export type Row = Record<string, number>;

export function readText(file: string): string {
  try {
    return readFileSync(file, "utf-8");
  } catch (err) {
    throw new InputError(`cannot read ${file}: ${(err as Error).message}`);
  }
}

export function readJson(file: string): unknown {
  const text = readText(file);
  try {
    return JSON.parse(text);
  } catch (err) {
    throw new SchemaError(`${file}: not valid JSON (${(err as Error).message})`);
  }
}

/** Header CSV to numeric rows; any non-numeric cell is a schema failure. */
export function readCsv(file: string): { columns: string[]; rows: Row[] } {
  const text = readText(file);
  const parsed = Papa.parse<Record<string, unknown>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${file}: ${parsed.errors[0].message}`);
  }
  const columns = parsed.meta.fields ?? [];
  const rows = parsed.data.map((raw, i) => {
    const row: Row = {};
    for (const col of columns) {
      const value = raw[col];
      if (typeof value !== "number" || !Number.isFinite(value)) {
        throw new SchemaError(`${file}: row ${i + 1} column ${col} is not numeric`);
      }
      row[col] = value;
    }
    return row;
  });
  if (rows.length === 0) throw new SchemaError(`${file}: no data rows`);
  return { columns, rows };
}
