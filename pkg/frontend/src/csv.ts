/** Minimal reader for the simulator's CSV outputs.
 *
 * All files are plain comma-separated with one header row; trailing lines
 * starting with '#' (the sweep report's fitted-slope footer) are kept
 * separately. Values parse as numbers where possible, otherwise stay strings.
 */

export interface Table {
  columns: string[];
  /** column name -> values (numbers, or NaN where non-numeric) */
  numeric: Map<string, number[]>;
  /** column name -> raw string values */
  raw: Map<string, string[]>;
  footers: string[];
  rows: number;
}

export class MissingColumnError extends Error {
  constructor(wanted: string, available: string[]) {
    super(`column '${wanted}' not found; available columns: ${available.join(", ")}`);
    this.name = "MissingColumnError";
  }
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const footers = lines.filter((l) => l.startsWith("#"));
  const body = lines.filter((l) => !l.startsWith("#"));
  const columns = body[0].split(",").map((c) => c.trim());
  const raw = new Map<string, string[]>(columns.map((c) => [c, []]));
  for (const line of body.slice(1)) {
    const parts = line.split(",");
    columns.forEach((c, i) => raw.get(c)!.push((parts[i] ?? "").trim()));
  }
  const numeric = new Map<string, number[]>();
  for (const c of columns) {
    numeric.set(c, raw.get(c)!.map((v) => (v === "" ? NaN : Number(v))));
  }
  return { columns, numeric, raw, footers, rows: body.length - 1 };
}

export function column(table: Table, name: string): number[] {
  const values = table.numeric.get(name);
  if (values === undefined) {
    throw new MissingColumnError(name, table.columns);
  }
  return values;
}

export function stringColumn(table: Table, name: string): string[] {
  const values = table.raw.get(name);
  if (values === undefined) {
    throw new MissingColumnError(name, table.columns);
  }
  return values;
}
