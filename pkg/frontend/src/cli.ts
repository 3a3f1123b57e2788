#!/usr/bin/env node
/** plots <spec.json>: render one figure from the simulator's CSV outputs. */

import { readFileSync, writeFileSync } from "node:fs";
import { resolve, dirname } from "node:path";

import { parseCsv, MissingColumnError } from "./csv.js";
import { parseSpec, SpecError } from "./spec.js";
import { render } from "./plots.js";

export function runCli(argv: string[]): number {
  const args = argv.filter((a) => a !== "plots");
  if (args.length !== 1 || args[0] === "-h" || args[0] === "--help") {
    console.error("usage: plots <spec.json>");
    console.error("  spec: { kind: slope|timeseries|shell-decay, input, output, x?, y?, scales?, title? }");
    return args.length === 1 ? 0 : 2;
  }
  const specPath = resolve(args[0]);
  try {
    const spec = parseSpec(JSON.parse(readFileSync(specPath, "utf8")));
    const inputPath = resolve(dirname(specPath), spec.input);
    const table = parseCsv(readFileSync(inputPath, "utf8"));
    const svg = render(table, spec);
    const outPath = resolve(dirname(specPath), spec.output);
    writeFileSync(outPath, svg);
    console.log(`wrote ${outPath}`);
    return 0;
  } catch (err) {
    if (err instanceof MissingColumnError || err instanceof SpecError) {
      console.error(`plots: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const isMain = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (isMain) {
  process.exit(runCli(process.argv.slice(2)));
}
