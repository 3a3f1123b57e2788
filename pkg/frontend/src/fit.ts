/** Log-log least squares, matching the simulator's fit_slope. */

export interface SlopeFit {
  slope: number;
  intercept: number;
  /** rms of the log-space misfit */
  residual: number;
}

export function fitSlope(x: number[], y: number[]): SlopeFit {
  if (x.length !== y.length || x.length < 2) {
    throw new Error(`need matching x/y with at least 2 points, got ${x.length}/${y.length}`);
  }
  if (x.some((v) => v <= 0) || y.some((v) => v <= 0)) {
    throw new Error("log-log fit needs positive values");
  }
  const lx = x.map(Math.log);
  const ly = y.map(Math.log);
  const n = lx.length;
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
  let ss = 0;
  for (let i = 0; i < n; i++) {
    const d = ly[i] - (slope * lx[i] + intercept);
    ss += d * d;
  }
  return { slope, intercept, residual: Math.sqrt(ss / n) };
}
