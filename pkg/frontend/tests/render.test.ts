import { createHash } from "node:crypto";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";
import { InputError, SchemaError, render } from "../src/render.js";

const fixtures = fileURLToPath(new URL("../fixtures", import.meta.url));
const fx = (name: string) => join(fixtures, name);

// Frozen from the reference pipeline: fitting F(beta_c + eps) over
// eps in [1e-3, 1e-2] must land on these to within serialization noise.
const EXPONENT = 1.9790692797393477;
const AMPLITUDE = 4.321838410554277;

let tmp: string;
beforeAll(() => {
  tmp = mkdtempSync(join(tmpdir(), "plots-"));
});

const sha = (file: string) =>
  createHash("sha256").update(readFileSync(file)).digest("hex");

describe("render", () => {
  it("draws a free-energy curve from a minimal CSV", () => {
    const csv = join(tmp, "fe_small.csv");
    writeFileSync(
      csv,
      "beta,F,delta_residual\n0.2,0.01,1e-12\n0.4,0.05,1e-12\n0.6,0.12,1e-12\n",
    );
    const out = join(tmp, "fe_small.svg");
    const result = render({ kind: "fe-curve", inputs: [csv], out });
    expect(result.out).toBe(out);
    expect(result.fit).toBeUndefined();
    expect(readFileSync(out, "utf8")).toContain("<svg");
  });

  it("fits the critical window and reproduces the frozen exponent and amplitude", () => {
    const before = [fx("fe_crit.csv"), fx("crit.json"), fx("pq.json")].map(sha);
    const out = join(tmp, "crit.svg");
    const result = render({
      kind: "crit-fit",
      inputs: [fx("fe_crit.csv")],
      crit: fx("crit.json"),
      constants: fx("pq.json"),
      out,
    });
    const fit = result.fit!;
    expect(Math.abs(fit.exponent - EXPONENT)).toBeLessThan(1e-6);
    expect(Math.abs(fit.amplitude / AMPLITUDE - 1)).toBeLessThan(1e-6);
    expect(fit.exponentStderr).toBeGreaterThan(0);
    expect(fit.exponentStderr).toBeLessThan(0.01);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain("<svg");
    expect(svg).toContain("eps^2 overlay");
    const after = [fx("fe_crit.csv"), fx("crit.json"), fx("pq.json")].map(sha);
    expect(after).toEqual(before);
  });

  it("refuses crit-fit without the two JSON companions", () => {
    expect(() =>
      render({ kind: "crit-fit", inputs: [fx("fe_crit.csv")], out: join(tmp, "x.svg") }),
    ).toThrow(InputError);
  });

  it("draws the plateau diagnostic", () => {
    const out = join(tmp, "plateau.svg");
    render({ kind: "plateau", inputs: [fx("plateau.csv")], out });
    expect(readFileSync(out, "utf8")).toContain("<svg");
  });

  it("overlays KS statistics from several runs against N", () => {
    const out = join(tmp, "ks.svg");
    const inputs = [fx("ks_512.json"), fx("ks_1024.json"), fx("ks_2048.json")];
    const before = inputs.map(sha);
    render({ kind: "ks", inputs, out });
    expect(readFileSync(out, "utf8")).toContain("<svg");
    expect(inputs.map(sha)).toEqual(before);
  });

  it("draws contact tails for both boundary layouts", () => {
    for (const name of ["contact_free.csv", "contact_cons.csv"]) {
      const out = join(tmp, name.replace(".csv", ".svg"));
      render({ kind: "contact-tail", inputs: [fx(name)], out });
      expect(readFileSync(out, "utf8")).toContain("<svg");
    }
  });

  it("rejects a CSV with the wrong columns and names the diff", () => {
    const csv = join(tmp, "bad.csv");
    writeFileSync(csv, "beta,logZ\n0.1,0.2\n");
    let message = "";
    try {
      render({ kind: "fe-curve", inputs: [csv], out: join(tmp, "bad.svg") });
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaError);
      message = (err as Error).message;
    }
    expect(message).toContain("missing [F, delta_residual]");
    expect(message).toContain("unexpected [logZ]");
  });

  it("rejects a missing input before touching anything", () => {
    expect(() =>
      render({ kind: "plateau", inputs: [join(tmp, "nope.csv")], out: join(tmp, "n.svg") }),
    ).toThrow(/input file not found/);
  });

  it("refuses to write onto one of its inputs", () => {
    const csv = join(tmp, "self.csv");
    writeFileSync(csv, "N,value,TV\n100,1.0,0.1\n200,1.0,0.05\n400,1.0,0.01\n");
    const original = sha(csv);
    expect(() => render({ kind: "plateau", inputs: [csv], out: csv })).toThrow(
      /refusing to overwrite input/,
    );
    expect(sha(csv)).toBe(original);
  });

  it("enforces single-input kinds", () => {
    expect(() =>
      render({
        kind: "plateau",
        inputs: [fx("plateau.csv"), fx("fe_curve.csv")],
        out: join(tmp, "two.svg"),
      }),
    ).toThrow(/exactly one/);
  });

  it("renders the full fixture free-energy sweep with monotone values", () => {
    const out = join(tmp, "fe_full.svg");
    render({ kind: "fe-curve", inputs: [fx("fe_curve.csv")], out });
    const rows = readFileSync(fx("fe_curve.csv"), "utf8")
      .trim()
      .split("\n")
      .slice(1)
      .map((line) => Number(line.split(",")[1]));
    for (let i = 1; i < rows.length; i++) {
      expect(rows[i]).toBeGreaterThanOrEqual(rows[i - 1]);
    }
    expect(readFileSync(out, "utf8")).toContain("<svg");
  });
});
