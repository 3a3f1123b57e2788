/** Tiny SVG scene builder: one axes panel with linear or log scales.
 *
 * Deliberately dependency-free; rendering is a pure function of the data,
 * so re-rendering a spec is byte-identical.
 */

export type ScaleKind = "linear" | "log";

export interface PanelBox {
  x0: number;
  y0: number;
  width: number;
  height: number;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export function color(i: number): string {
  return PALETTE[i % PALETTE.length];
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(4)));
}

export class Scale {
  constructor(
    readonly kind: ScaleKind,
    readonly lo: number,
    readonly hi: number,
    readonly pixLo: number,
    readonly pixHi: number,
  ) {
    if (kind === "log" && (lo <= 0 || hi <= 0)) {
      throw new Error(`log scale needs positive range, got [${lo}, ${hi}]`);
    }
  }

  map(v: number): number {
    const t =
      this.kind === "log"
        ? (Math.log(v) - Math.log(this.lo)) / (Math.log(this.hi) - Math.log(this.lo))
        : (v - this.lo) / (this.hi - this.lo);
    return this.pixLo + t * (this.pixHi - this.pixLo);
  }

  ticks(n = 5): number[] {
    if (this.kind === "log") {
      const d0 = Math.ceil(Math.log10(this.lo) - 1e-9);
      const d1 = Math.floor(Math.log10(this.hi) + 1e-9);
      const out: number[] = [];
      for (let d = d0; d <= d1; d++) out.push(Math.pow(10, d));
      if (out.length >= 2) return out;
      // narrow log range: fall back to a few geometric ticks
      const g: number[] = [];
      for (let i = 0; i <= n - 1; i++) {
        g.push(this.lo * Math.pow(this.hi / this.lo, i / (n - 1)));
      }
      return g;
    }
    const span = this.hi - this.lo;
    const step = Math.pow(10, Math.floor(Math.log10(span / n)));
    const mult = span / n / step >= 5 ? 5 : span / n / step >= 2 ? 2 : 1;
    const s = mult * step;
    const first = Math.ceil(this.lo / s) * s;
    const out: number[] = [];
    for (let v = first; v <= this.hi + 1e-12 * span; v += s) out.push(v);
    return out;
  }
}

/** pad a (lo, hi) data range; keeps flat data visible */
export function padRange(lo: number, hi: number, kind: ScaleKind): [number, number] {
  if (kind === "log") {
    const f = hi / lo;
    const pad = f < 1.5 ? 2 : Math.pow(f, 0.08);
    return [lo / pad, hi * pad];
  }
  const span = hi - lo;
  const pad = span === 0 ? Math.max(Math.abs(hi) * 0.1, 1e-12) : span * 0.08;
  return [lo - pad, hi + pad];
}

export class Panel {
  readonly parts: string[] = [];

  constructor(
    readonly box: PanelBox,
    readonly xs: Scale,
    readonly ys: Scale,
  ) {}

  frame(xLabel: string, yLabel: string, title: string): void {
    const { x0, y0, width, height } = this.box;
    this.parts.push(
      `<rect x="${x0}" y="${y0}" width="${width}" height="${height}" fill="none" stroke="#333" stroke-width="1"/>`,
    );
    for (const t of this.xs.ticks()) {
      const px = this.xs.map(t);
      if (px < x0 - 0.5 || px > x0 + width + 0.5) continue;
      this.parts.push(
        `<line x1="${px.toFixed(2)}" y1="${y0 + height}" x2="${px.toFixed(2)}" y2="${y0 + height + 4}" stroke="#333"/>`,
        `<text x="${px.toFixed(2)}" y="${y0 + height + 16}" font-size="10" text-anchor="middle">${fmtTick(t)}</text>`,
      );
    }
    for (const t of this.ys.ticks()) {
      const py = this.ys.map(t);
      if (py < y0 - 0.5 || py > y0 + height + 0.5) continue;
      this.parts.push(
        `<line x1="${x0 - 4}" y1="${py.toFixed(2)}" x2="${x0}" y2="${py.toFixed(2)}" stroke="#333"/>`,
        `<text x="${x0 - 6}" y="${(py + 3).toFixed(2)}" font-size="10" text-anchor="end">${fmtTick(t)}</text>`,
      );
    }
    this.parts.push(
      `<text x="${x0 + width / 2}" y="${y0 + height + 30}" font-size="11" text-anchor="middle">${escapeXml(xLabel)}</text>`,
      `<text x="${x0 - 44}" y="${y0 + height / 2}" font-size="11" text-anchor="middle" transform="rotate(-90 ${x0 - 44} ${y0 + height / 2})">${escapeXml(yLabel)}</text>`,
      `<text x="${x0 + width / 2}" y="${y0 - 6}" font-size="12" font-weight="bold" text-anchor="middle">${escapeXml(title)}</text>`,
    );
  }

  polyline(x: number[], y: number[], stroke: string, dash = ""): void {
    const pts = x
      .map((v, i) => `${this.xs.map(v).toFixed(2)},${this.ys.map(y[i]).toFixed(2)}`)
      .join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="1.5"${dashAttr}/>`,
    );
  }

  markers(x: number[], y: number[], fill: string): void {
    for (let i = 0; i < x.length; i++) {
      this.parts.push(
        `<circle cx="${this.xs.map(x[i]).toFixed(2)}" cy="${this.ys.map(y[i]).toFixed(2)}" r="3" fill="${fill}"/>`,
      );
    }
  }

  annotate(text: string, fx: number, fy: number, fill = "#000"): void {
    const px = this.box.x0 + fx * this.box.width;
    const py = this.box.y0 + fy * this.box.height;
    this.parts.push(
      `<text x="${px.toFixed(2)}" y="${py.toFixed(2)}" font-size="11" fill="${fill}">${escapeXml(text)}</text>`,
    );
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    ...body,
    "</svg>",
    "",
  ].join("\n");
}
