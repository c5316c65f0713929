import * as Plot from "@observablehq/plot";
import { JSDOM } from "jsdom";
import type { Row } from "./csv.js";
import type { PowerFit } from "./fit.js";

// Every figure renders headless through a throwaway DOM and comes back as a
// standalone SVG string.

function toSvg(element: ReturnType<typeof Plot.plot>): string {
  element.setAttributeNS(
    "http://www.w3.org/2000/xmlns/",
    "xmlns",
    "http://www.w3.org/2000/svg",
  );
  element.setAttributeNS(
    "http://www.w3.org/2000/xmlns/",
    "xmlns:xlink",
    "http://www.w3.org/1999/xlink",
  );
  return element.outerHTML;
}

function dom(): Document {
  return new JSDOM("").window.document;
}

export function feCurve(rows: Row[], title?: string): string {
  return toSvg(
    Plot.plot({
      document: dom(),
      title: title ?? "Free energy",
      x: { label: "beta" },
      y: { label: "F(beta)", grid: true },
      marks: [
        Plot.ruleY([0]),
        Plot.lineY(rows, { x: "beta", y: "F" }),
        Plot.dot(rows, { x: "beta", y: "F", r: 2 }),
      ],
    }),
  );
}

export interface CritPoint {
  eps: number;
  F: number;
}

export function critFit(
  points: CritPoint[],
  fit: PowerFit,
  c1: number,
  title?: string,
): string {
  const lo = Math.min(...points.map((p) => p.eps));
  const hi = Math.max(...points.map((p) => p.eps));
  const grid = Array.from({ length: 64 }, (_, i) =>
    lo * Math.pow(hi / lo, i / 63),
  );
  const fitted = grid.map((eps) => ({
    eps,
    F: fit.amplitude * Math.pow(eps, fit.exponent),
  }));
  const overlay = grid.map((eps) => ({ eps, F: c1 * eps * eps }));
  return toSvg(
    Plot.plot({
      document: dom(),
      title: title ?? "Free energy near the critical point",
      subtitle:
        `fit ${fit.amplitude.toPrecision(6)} * eps^${fit.exponent.toPrecision(6)}` +
        ` (solid); ${c1.toPrecision(6)} * eps^2 overlay (dashed)`,
      x: { label: "beta - beta_c", type: "log" },
      y: { label: "F", type: "log", grid: true },
      marks: [
        Plot.line(fitted, { x: "eps", y: "F", stroke: "steelblue" }),
        Plot.line(overlay, {
          x: "eps",
          y: "F",
          stroke: "darkorange",
          strokeDasharray: "4,3",
        }),
        Plot.dot(points, { x: "eps", y: "F", r: 3, fill: "black" }),
      ],
    }),
  );
}

export function plateau(rows: Row[], title?: string): string {
  return toSvg(
    Plot.plot({
      document: dom(),
      title: title ?? "Normalized partition plateau",
      x: { label: "N", type: "log", base: 2 },
      y: { label: "value", grid: true },
      marks: [
        Plot.lineY(rows, { x: "N", y: "value" }),
        Plot.dot(rows, { x: "N", y: "value", r: 3 }),
      ],
    }),
  );
}

export interface KsPoint {
  N: number;
  t: number;
  ks: number;
}

export function ksCurves(points: KsPoint[], title?: string): string {
  const labeled = points.map((p) => ({ ...p, series: `t=${p.t}` }));
  return toSvg(
    Plot.plot({
      document: dom(),
      title: title ?? "KS distance to the reference law",
      subtitle: "one curve per rescaled time",
      x: { label: "N", type: "log", base: 2 },
      y: { label: "KS", grid: true },
      marks: [
        Plot.ruleY([0]),
        Plot.lineY(labeled, { x: "N", y: "ks", stroke: "series" }),
        Plot.dot(labeled, { x: "N", y: "ks", r: 3, fill: "series" }),
      ],
    }),
  );
}

export interface TailSeries {
  L: number;
  tail: number;
  series: string;
}

export function contactTail(points: TailSeries[], title?: string): string {
  return toSvg(
    Plot.plot({
      document: dom(),
      title: title ?? "Contact-extreme tail probabilities",
      x: { label: "L" },
      y: { label: "P[stat >= L]", grid: true, domain: [0, 1] },
      marks: [
        Plot.ruleY([0]),
        Plot.lineY(points, { x: "L", y: "tail", stroke: "series" }),
        Plot.dot(points, { x: "L", y: "tail", r: 2, fill: "series" }),
      ],
    }),
  );
}
