/** The three figure kinds, rendered from the simulator's CSV contracts. */

import { Table, column, stringColumn } from "./csv.js";
import { fitSlope } from "./fit.js";
import { Panel, Scale, ScaleKind, color, document as svgDocument, padRange } from "./svg.js";
import { PlotSpec, SpecError } from "./spec.js";

const WIDTH = 560;
const HEIGHT = 420;
const MARGIN = { left: 64, right: 16, top: 28, bottom: 44 };

function panelScales(
  xr: [number, number],
  yr: [number, number],
  xKind: ScaleKind,
  yKind: ScaleKind,
  box = { x0: MARGIN.left, y0: MARGIN.top, width: WIDTH - MARGIN.left - MARGIN.right, height: HEIGHT - MARGIN.top - MARGIN.bottom },
): Panel {
  const xs = new Scale(xKind, xr[0], xr[1], box.x0, box.x0 + box.width);
  const ys = new Scale(yKind, yr[0], yr[1], box.y0 + box.height, box.y0);
  return new Panel(box, xs, ys);
}

function finitePairs(x: number[], y: number[]): [number[], number[]] {
  const fx: number[] = [];
  const fy: number[] = [];
  for (let i = 0; i < x.length; i++) {
    if (Number.isFinite(x[i]) && Number.isFinite(y[i])) {
      fx.push(x[i]);
      fy.push(y[i]);
    }
  }
  return [fx, fy];
}

/** Convergence plot: data points, fitted log-log line, slope annotation. */
export function renderSlope(table: Table, spec: PlotSpec): string {
  const xName = spec.x ?? "eps";
  const yName = typeof spec.y === "string" ? spec.y : (spec.y?.[0] ?? "sup_L1");
  const [x, y] = finitePairs(column(table, xName), column(table, yName));
  if (x.length < 2) {
    throw new SpecError(`slope plot needs >= 2 finite (${xName}, ${yName}) rows`);
  }
  const fit = fitSlope(x, y);
  const xKind = spec.scales?.x ?? "log";
  const yKind = spec.scales?.y ?? "log";
  const panel = panelScales(
    padRange(Math.min(...x), Math.max(...x), xKind),
    padRange(Math.min(...y), Math.max(...y), yKind),
    xKind,
    yKind,
  );
  panel.frame(xName, yName, spec.title ?? `${yName} vs ${xName}`);
  const xsSorted = [...x].sort((a, b) => a - b);
  const fitted = xsSorted.map((v) => Math.exp(fit.intercept + fit.slope * Math.log(v)));
  panel.polyline(xsSorted, fitted, "#888", "5,3");
  panel.markers(x, y, color(0));
  panel.annotate(`slope ${fit.slope.toFixed(2)}`, 0.06, 0.10, color(0));
  panel.annotate(`rms log residual ${fit.residual.toFixed(3)}`, 0.06, 0.16, "#666");
  return svgDocument(WIDTH, HEIGHT, panel.parts);
}

/** Diagnostics against time; several columns share the panel. */
export function renderTimeseries(table: Table, spec: PlotSpec): string {
  const xName = spec.x ?? "t";
  const yNames =
    spec.y === undefined ? ["mass"] : typeof spec.y === "string" ? [spec.y] : spec.y;
  const t = column(table, xName);
  const series = yNames.map((name) => column(table, name));
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s) {
      if (Number.isFinite(v)) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
    }
  }
  if (!Number.isFinite(lo)) {
    throw new SpecError(`no finite values in columns ${yNames.join(", ")}`);
  }
  const xKind = spec.scales?.x ?? "linear";
  const yKind = spec.scales?.y ?? "linear";
  const panel = panelScales(
    padRange(Math.min(...t), Math.max(...t), xKind),
    padRange(lo, hi, yKind),
    xKind,
    yKind,
  );
  panel.frame(xName, yNames.join(", "), spec.title ?? yNames.join(", "));
  series.forEach((s, i) => {
    const [fx, fy] = finitePairs(t, s);
    panel.polyline(fx, fy, color(i));
    panel.annotate(yNames[i], 0.04, 0.08 + 0.06 * i, color(i));
  });
  return svgDocument(WIDTH, HEIGHT, panel.parts);
}

/** Calibration residual decay: one panel per condition, with order-1 and
 * order-2 reference lines. */
export function renderShellDecay(table: Table, spec: PlotSpec): string {
  const conditions = stringColumn(table, "condition");
  const radius = column(table, "shell_radius");
  const residual = column(table, "max_residual");
  const order = column(table, "fitted_order");
  const names = [...new Set(conditions)];
  if (names.length === 0) {
    throw new SpecError("shell-decay input has no rows");
  }
  const cols = 3;
  const rows = Math.ceil(names.length / cols);
  const pw = 300;
  const ph = 250;
  const width = cols * pw;
  const height = rows * ph;
  const parts: string[] = [];
  names.forEach((name, i) => {
    const idx = conditions.map((c, k) => (c === name ? k : -1)).filter((k) => k >= 0);
    const r = idx.map((k) => radius[k]);
    const v = idx.map((k) => Math.max(residual[k], 1e-300));
    const fitted = order[idx[0]];
    const positive = v.filter((q) => q > 0);
    const lo = Math.min(...positive);
    const hi = Math.max(...positive);
    const box = {
      x0: (i % cols) * pw + 56,
      y0: Math.floor(i / cols) * ph + 26,
      width: pw - 70,
      height: ph - 66,
    };
    const panel = panelScales(
      padRange(Math.min(...r), Math.max(...r), "log"),
      padRange(Math.min(lo, hi / 100), hi, "log"),
      "log",
      "log",
      box,
    );
    panel.frame("shell radius", "max residual", name);
    // order-1 and order-2 guide lines anchored at the outermost shell
    const rMax = Math.max(...r);
    const anchor = v[r.indexOf(rMax)];
    for (const [p, dash] of [
      [1, "4,3"],
      [2, "2,3"],
    ] as const) {
      panel.polyline(
        r,
        r.map((q) => anchor * Math.pow(q / rMax, p)),
        "#999",
        dash,
      );
    }
    const sorted = idx
      .map((k) => [radius[k], Math.max(residual[k], 1e-300)] as const)
      .sort((a, b) => a[0] - b[0]);
    panel.polyline(sorted.map((q) => q[0]), sorted.map((q) => q[1]), color(0));
    panel.markers(sorted.map((q) => q[0]), sorted.map((q) => q[1]), color(0));
    panel.annotate(`fitted order ${fitted.toFixed(2)}`, 0.06, 0.12, color(0));
    parts.push(...panel.parts);
  });
  return svgDocument(width, height, parts);
}

export function render(table: Table, spec: PlotSpec): string {
  switch (spec.kind) {
    case "slope":
      return renderSlope(table, spec);
    case "timeseries":
      return renderTimeseries(table, spec);
    case "shell-decay":
      return renderShellDecay(table, spec);
  }
}
