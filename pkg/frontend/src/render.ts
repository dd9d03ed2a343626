/** Render a figure spec: image file (.png or .svg) plus fitted-slope JSON. */

import { writeFileSync } from "node:fs";
import { dirname, extname, join, basename } from "node:path";

import { readCsv } from "./csv.js";
import { FigureSpec, extractSeries, loadFigureSpec } from "./figure.js";
import { buildScene } from "./scene.js";
import { sceneToPng } from "./raster.js";
import { sceneToSvg } from "./svg.js";

export interface RenderResult {
  image: string;
  slopes: string;
}

export function renderFigure(spec: FigureSpec, outPath: string,
                             specDir = "."): RenderResult {
  const inputPath = spec.input.startsWith("/")
    ? spec.input
    : join(specDir, spec.input);
  const table = readCsv(inputPath);
  const series = extractSeries(table, spec);
  const { scene, results } = buildScene(spec, series);

  const ext = extname(outPath).toLowerCase();
  if (ext === ".svg") {
    writeFileSync(outPath, sceneToSvg(scene));
  } else if (ext === ".png") {
    writeFileSync(outPath, sceneToPng(scene));
  } else {
    throw new Error(`unsupported image extension '${ext}' (use .png or .svg)`);
  }

  const slopesPath = join(
    dirname(outPath),
    basename(outPath, extname(outPath)) + ".slopes.json",
  );
  const payload = {
    series: results.map((r) => ({
      label: r.label,
      n: r.n,
      slope: r.fit?.slope ?? null,
      intercept: r.fit?.intercept ?? null,
      r2: r.fit?.r2 ?? null,
    })),
    guides: spec.guides ?? [],
  };
  writeFileSync(slopesPath, JSON.stringify(payload, null, 2) + "\n");
  return { image: outPath, slopes: slopesPath };
}

export function renderFromFile(specPath: string, outPath: string): RenderResult {
  const spec = loadFigureSpec(specPath);
  return renderFigure(spec, outPath, dirname(specPath));
}
