import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { scalingFit } from "../src/fit.js";
import { parseCsv } from "../src/csv.js";

const fixtureCsv = readFileSync(new URL("../fixtures/scaling_fixture.csv",
                                        import.meta.url), "utf-8");
const expected = JSON.parse(readFileSync(
  new URL("../fixtures/scaling_fixture.slopes.json", import.meta.url), "utf-8"));

describe("scalingFit", () => {
  it("recovers an exact power law", () => {
    const pts: Array<[number, number]> = [1, 2, 4, 8].map((x) =>
      [x, 3.7 * Math.pow(x, -1.5)]);
    const fit = scalingFit(pts);
    expect(fit.slope).toBeCloseTo(-1.5, 12);
    expect(fit.r2).toBeCloseTo(1.0, 12);
  });

  it("matches the primary implementation on the shared fixture to 1e-9", () => {
    const table = parseCsv(fixtureCsv);
    for (const protocol of ["periodized", "snapshot"]) {
      const pts = table.rows
        .filter((r) => r.protocol === protocol)
        .map((r): [number, number] => [Number(r.K), Number(r.std)]);
      const fit = scalingFit(pts);
      expect(Math.abs(fit.slope - expected[protocol].slope)).toBeLessThan(1e-9);
      expect(Math.abs(fit.intercept - expected[protocol].intercept))
        .toBeLessThan(1e-9);
      expect(Math.abs(fit.r2 - expected[protocol].r2)).toBeLessThan(1e-9);
    }
  });

  it("rejects short or non-positive input", () => {
    expect(() => scalingFit([[1, 1], [2, 2]])).toThrow();
    expect(() => scalingFit([[1, 1], [2, 0], [3, 2]])).toThrow();
  });
});
