/** Least-squares line through (log10 x, log10 y).
 *
 * Must reproduce the primary implementation's scaling fit bit-for-bit in
 * substance: same normal-equation solution in double precision (agreement
 * is asserted to 1e-9 against a fixture computed by the primary).
 */

export interface ScalingFit {
  slope: number;
  intercept: number;
  r2: number;
}

export function scalingFit(points: Array<[number, number]>): ScalingFit {
  if (points.length < 3) {
    throw new Error("scaling fit needs at least 3 points");
  }
  if (points.some(([x, y]) => !(x > 0) || !(y > 0))) {
    throw new Error("scaling fit needs positive coordinates");
  }
  const lx = points.map(([x]) => Math.log10(x));
  const ly = points.map(([, y]) => Math.log10(y));
  const n = points.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  let ssRes = 0;
  let ssTot = 0;
  for (let i = 0; i < n; i++) {
    const fit = slope * lx[i] + intercept;
    ssRes += (ly[i] - fit) * (ly[i] - fit);
    ssTot += (ly[i] - my) * (ly[i] - my);
  }
  return { slope, intercept, r2: ssTot > 0 ? 1 - ssRes / ssTot : 1 };
}
