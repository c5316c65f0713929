// Column contracts for the artifacts the primary CLI documents. A figure
// only ever consumes files whose schema it can name; anything else is a
// SchemaError carrying the exact column diff so CI logs say what was wrong.

export const KINDS = ["fe-curve", "crit-fit", "plateau", "ks", "contact-tail"] as const;
export type Kind = (typeof KINDS)[number];

export class InputError extends Error {}
export class SchemaError extends Error {}

export const CSV_COLUMNS: Record<string, string[][]> = {
  "fe-curve": [["beta", "F", "delta_residual"]],
  "crit-fit": [["beta", "F", "delta_residual"]],
  plateau: [["N", "value", "TV"]],
  "contact-tail": [
    ["L", "tail_max_contact"],
    ["L", "tail_L", "tail_R"],
  ],
};

function diffMessage(found: string[], expected: string[]): string {
  const missing = expected.filter((c) => !found.includes(c));
  const unexpected = found.filter((c) => !expected.includes(c));
  return (
    `expected columns [${expected.join(", ")}], got [${found.join(", ")}]` +
    `; missing [${missing.join(", ")}], unexpected [${unexpected.join(", ")}]`
  );
}

/** Matches found columns against the kind's accepted sets, order-insensitive. */
export function checkColumns(kind: Kind, found: string[], file: string): string[] {
  const accepted = CSV_COLUMNS[kind];
  if (!accepted) throw new SchemaError(`${kind} does not read CSV input`);
  for (const expected of accepted) {
    if (expected.length === found.length && expected.every((c) => found.includes(c))) {
      return expected;
    }
  }
  const diffs = accepted.map((e) => diffMessage(found, e)).join("\n  or ");
  throw new SchemaError(`${file}: ${diffs}`);
}

export interface KsPayload {
  N: number;
  t: number[];
  ks: number[];
  regime: string;
}

export function checkKsPayload(raw: unknown, file: string): KsPayload {
  const obj = raw as Record<string, unknown>;
  const missing = ["N", "t", "ks", "regime"].filter((k) => !(obj && k in obj));
  if (missing.length > 0) {
    throw new SchemaError(`${file}: missing keys [${missing.join(", ")}]`);
  }
  const { N, t, ks, regime } = obj as {
    N: number;
    t: number[];
    ks: number[];
    regime: string;
  };
  if (!Number.isFinite(N)) throw new SchemaError(`${file}: N is not a number`);
  if (!Array.isArray(t) || !Array.isArray(ks) || t.length !== ks.length) {
    throw new SchemaError(`${file}: t and ks must be arrays of equal length`);
  }
  return { N, t, ks, regime: String(regime) };
}

/** Plucks one finite numeric field out of a JSON artifact. */
export function numberField(raw: unknown, key: string, file: string): number {
  const obj = raw as Record<string, unknown>;
  if (!obj || !(key in obj)) throw new SchemaError(`${file}: missing keys [${key}]`);
  const value = obj[key];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new SchemaError(`${file}: ${key} is not a finite number`);
  }
  return value;
}
