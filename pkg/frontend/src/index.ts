export { parseCsv, column, stringColumn, MissingColumnError } from "./csv.js";
export type { Table } from "./csv.js";
export { fitSlope } from "./fit.js";
export type { SlopeFit } from "./fit.js";
export { parseSpec, SpecError } from "./spec.js";
export type { PlotSpec, PlotKind } from "./spec.js";
export { render, renderSlope, renderTimeseries, renderShellDecay } from "./plots.js";
export { runCli } from "./cli.js";
