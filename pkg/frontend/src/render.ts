import { createHash } from "node:crypto";
import { existsSync, readFileSync, writeFileSync } from "node:fs";
import { resolve } from "node:path";
import { readCsv, readJson } from "./csv.js";
import {
  checkColumns,
  checkKsPayload,
  numberField,
  InputError,
  SchemaError,
  type Kind,
} from "./schema.js";
import { powerLawFit, type PowerFit } from "./fit.js";
import * as figures from "./figures.js";

export interface FigureSpec {
  kind: Kind;
  inputs: string[];
  out: string;
  title?: string;
  /** critical-point JSON (beta_c), crit-fit only */
  crit?: string;
  /** closed-form constants JSON (C_1), crit-fit only */
  constants?: string;
}

export interface RenderResult {
  out: string;
  fit?: PowerFit;
}

function sha256(file: string): string {
  return createHash("sha256").update(readFileSync(file)).digest("hex");
}

/** Reads the artifacts, draws one SVG, and proves the inputs were untouched. */
export function render(spec: FigureSpec): RenderResult {
  const inputs = [...spec.inputs];
  if (spec.crit) inputs.push(spec.crit);
  if (spec.constants) inputs.push(spec.constants);
  for (const file of inputs) {
    if (!existsSync(file)) throw new InputError(`input file not found: ${file}`);
  }
  const outPath = resolve(spec.out);
  if (inputs.some((f) => resolve(f) === outPath)) {
    throw new InputError(`refusing to overwrite input ${spec.out}`);
  }
  const before = inputs.map(sha256);

  let svg: string;
  let fit: PowerFit | undefined;
  switch (spec.kind) {
    case "fe-curve": {
      const { columns, rows } = readCsv(one(spec));
      checkColumns(spec.kind, columns, one(spec));
      svg = figures.feCurve(rows, spec.title);
      break;
    }
    case "crit-fit": {
      if (!spec.crit || !spec.constants) {
        throw new InputError("crit-fit needs --crit and --constants JSON inputs");
      }
      const { columns, rows } = readCsv(one(spec));
      checkColumns(spec.kind, columns, one(spec));
      const betaC = numberField(readJson(spec.crit), "beta_c", spec.crit);
      const c1 = numberField(readJson(spec.constants), "C_1", spec.constants);
      const points = rows
        .map((r) => ({ eps: r.beta - betaC, F: r.F }))
        .filter((p) => p.eps > 0 && p.F > 0);
      fit = powerLawFit(points.map((p) => p.eps), points.map((p) => p.F));
      svg = figures.critFit(points, fit, c1, spec.title);
      break;
    }
    case "plateau": {
      const { columns, rows } = readCsv(one(spec));
      checkColumns(spec.kind, columns, one(spec));
      svg = figures.plateau(rows, spec.title);
      break;
    }
    case "ks": {
      const points: figures.KsPoint[] = [];
      for (const file of spec.inputs) {
        const payload = checkKsPayload(readJson(file), file);
        payload.t.forEach((t, i) => points.push({ N: payload.N, t, ks: payload.ks[i] }));
      }
      points.sort((a, b) => a.t - b.t || a.N - b.N);
      svg = figures.ksCurves(points, spec.title);
      break;
    }
    case "contact-tail": {
      const { columns, rows } = readCsv(one(spec));
      const matched = checkColumns(spec.kind, columns, one(spec));
      const tails = matched.filter((c) => c !== "L");
      const points: figures.TailSeries[] = [];
      for (const col of tails) {
        for (const row of rows) points.push({ L: row.L, tail: row[col], series: col });
      }
      svg = figures.contactTail(points, spec.title);
      break;
    }
    default:
      throw new InputError(`unknown kind ${(spec as FigureSpec).kind}`);
  }

  writeFileSync(spec.out, svg + "\n");
  const after = inputs.map(sha256);
  inputs.forEach((file, i) => {
    if (before[i] !== after[i]) {
      throw new Error(`input ${file} changed during rendering`);
    }
  });
  return { out: spec.out, fit };
}

function one(spec: FigureSpec): string {
  if (spec.inputs.length !== 1) {
    throw new InputError(`${spec.kind} takes exactly one --in file`);
  }
  return spec.inputs[0];
}

export { InputError, SchemaError };
