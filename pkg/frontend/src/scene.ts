/** Deterministic log-log plot assembly: data series to drawing primitives.
 * The same scene renders to SVG or PNG, so both carry identical content
 * (no timestamps, fixed palette and layout). */

import { ScalingFit, scalingFit } from "./fit.js";
import { FigureSpec, SeriesData } from "./figure.js";

export type Element =
  | { kind: "line"; x1: number; y1: number; x2: number; y2: number;
      color: string; dash?: boolean }
  | { kind: "marker"; x: number; y: number; r: number; color: string }
  | { kind: "text"; x: number; y: number; text: string; color: string;
      size: number };

export interface Scene {
  width: number;
  height: number;
  elements: Element[];
}

export interface SeriesResult {
  label: string;
  n: number;
  fit: ScalingFit | null;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                 "#8c564b"];
const W = 640;
const H = 480;
const MARGIN = { left: 72, right: 24, top: 40, bottom: 48 };

function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(lo - 1e-9); e <= Math.floor(hi + 1e-9); e++) {
    ticks.push(e);
  }
  return ticks;
}

function fmtPow10(e: number): string {
  return `10^${e}`;
}

export function buildScene(
  spec: FigureSpec,
  series: SeriesData[],
): { scene: Scene; results: SeriesResult[] } {
  const xs = series.flatMap((s) => s.points.map((p) => Math.log10(p[0])));
  const ys = series.flatMap((s) => s.points.map((p) => Math.log10(p[1])));
  const pad = 0.08;
  const xLo = Math.min(...xs) - pad;
  const xHi = Math.max(...xs) + pad;
  const yLo = Math.min(...ys) - pad;
  const yHi = Math.max(...ys) + pad;
  const sx = (v: number) =>
    MARGIN.left + ((v - xLo) / (xHi - xLo)) * (W - MARGIN.left - MARGIN.right);
  const sy = (v: number) =>
    H - MARGIN.bottom - ((v - yLo) / (yHi - yLo)) * (H - MARGIN.top - MARGIN.bottom);

  const el: Element[] = [];
  // frame
  const frame = [
    [MARGIN.left, MARGIN.top, MARGIN.left, H - MARGIN.bottom],
    [MARGIN.left, H - MARGIN.bottom, W - MARGIN.right, H - MARGIN.bottom],
    [W - MARGIN.right, MARGIN.top, W - MARGIN.right, H - MARGIN.bottom],
    [MARGIN.left, MARGIN.top, W - MARGIN.right, MARGIN.top],
  ];
  for (const [x1, y1, x2, y2] of frame) {
    el.push({ kind: "line", x1, y1, x2, y2, color: "#000000" });
  }
  for (const e of decadeTicks(xLo, xHi)) {
    const x = sx(e);
    el.push({ kind: "line", x1: x, y1: MARGIN.top, x2: x,
              y2: H - MARGIN.bottom, color: "#dddddd" });
    el.push({ kind: "text", x: x - 12, y: H - MARGIN.bottom + 16,
              text: fmtPow10(e), color: "#000000", size: 10 });
  }
  for (const e of decadeTicks(yLo, yHi)) {
    const y = sy(e);
    el.push({ kind: "line", x1: MARGIN.left, y1: y, x2: W - MARGIN.right,
              y2: y, color: "#dddddd" });
    el.push({ kind: "text", x: MARGIN.left - 48, y: y + 4,
              text: fmtPow10(e), color: "#000000", size: 10 });
  }
  if (spec.title) {
    el.push({ kind: "text", x: MARGIN.left, y: MARGIN.top - 14,
              text: spec.title, color: "#000000", size: 12 });
  }
  if (spec.xlabel) {
    el.push({ kind: "text", x: W / 2 - 4 * spec.xlabel.length,
              y: H - 10, text: spec.xlabel, color: "#000000", size: 11 });
  }
  if (spec.ylabel) {
    el.push({ kind: "text", x: 8, y: MARGIN.top - 14, text: spec.ylabel,
              color: "#000000", size: 11 });
  }

  // reference slope guide lines through the plot center
  const cx = (xLo + xHi) / 2;
  const cy = (yLo + yHi) / 2;
  for (const g of spec.guides ?? []) {
    const x1 = xLo + 0.05 * (xHi - xLo);
    const x2 = xHi - 0.05 * (xHi - xLo);
    el.push({
      kind: "line",
      x1: sx(x1), y1: sy(cy + g * (x1 - cx)),
      x2: sx(x2), y2: sy(cy + g * (x2 - cx)),
      color: "#999999", dash: true,
    });
    el.push({ kind: "text", x: sx(x2) - 64, y: sy(cy + g * (x2 - cx)) - 6,
              text: `slope ${g}`, color: "#999999", size: 10 });
  }

  const results: SeriesResult[] = [];
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.points.map(([x, y]): [number, number] =>
      [sx(Math.log10(x)), sy(Math.log10(y))]);
    for (let k = 1; k < pts.length; k++) {
      el.push({ kind: "line", x1: pts[k - 1][0], y1: pts[k - 1][1],
                x2: pts[k][0], y2: pts[k][1], color });
    }
    for (const [x, y] of pts) {
      el.push({ kind: "marker", x, y, r: 3.5, color });
    }
    let fit: ScalingFit | null = null;
    if ((spec.annotate_slopes ?? true) && s.points.length >= 3) {
      fit = scalingFit(s.points);
    }
    const legend = fit === null
      ? s.label
      : `${s.label}: slope ${fit.slope.toFixed(3)}`;
    el.push({ kind: "marker", x: MARGIN.left + 10,
              y: MARGIN.top + 14 + 16 * i, r: 3.5, color });
    el.push({ kind: "text", x: MARGIN.left + 20,
              y: MARGIN.top + 18 + 16 * i, text: legend, color, size: 10 });
    results.push({ label: s.label, n: s.points.length, fit });
  });

  return { scene: { width: W, height: H, elements: el }, results };
}
