/** Plot specification: what to read, what kind of figure, where to write. */

export type PlotKind = "slope" | "timeseries" | "shell-decay";

export interface PlotSpec {
  kind: PlotKind;
  /** input CSV path (diagnostics, sweep report, or calibration residuals) */
  input: string;
  /** output image path (SVG) */
  output: string;
  /** x column (slope: default "eps"; timeseries: default "t") */
  x?: string;
  /** y column(s); slope takes one, timeseries one or more */
  y?: string | string[];
  /** axis scale overrides; slope and shell-decay default to log-log */
  scales?: { x?: "linear" | "log"; y?: "linear" | "log" };
  title?: string;
}

export class SpecError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SpecError";
  }
}

const KINDS: PlotKind[] = ["slope", "timeseries", "shell-decay"];

export function parseSpec(raw: unknown): PlotSpec {
  if (typeof raw !== "object" || raw === null) {
    throw new SpecError("plot spec must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  const kind = obj.kind;
  if (typeof kind !== "string" || !KINDS.includes(kind as PlotKind)) {
    throw new SpecError(`kind must be one of ${KINDS.join(", ")}, got ${JSON.stringify(kind)}`);
  }
  for (const field of ["input", "output"] as const) {
    if (typeof obj[field] !== "string" || obj[field] === "") {
      throw new SpecError(`spec needs a non-empty string '${field}'`);
    }
  }
  const y = obj.y;
  if (y !== undefined && typeof y !== "string" && !(Array.isArray(y) && y.every((v) => typeof v === "string"))) {
    throw new SpecError("'y' must be a column name or a list of column names");
  }
  const scales = (obj.scales ?? {}) as Record<string, unknown>;
  for (const axis of ["x", "y"]) {
    const v = scales[axis];
    if (v !== undefined && v !== "linear" && v !== "log") {
      throw new SpecError(`scales.${axis} must be 'linear' or 'log'`);
    }
  }
  return obj as unknown as PlotSpec;
}
