import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { parseCsv } from "../src/csv.js";
import { render } from "../src/plots.js";
import { parseSpec, SpecError } from "../src/spec.js";
import { runCli } from "../src/cli.js";

const SWEEP = [
  "eps,nx,dt,sup_L1,E0,sup_EF,C_fit,mass_drift_rel,sup_lambda_err,hausdorff_max",
  "0.08,128,0.0003125,0.08,0.0222,0.0222,0,4e-05,,",
  "0.056,192,0.00015625,0.056,0.0109,0.0109,0,2.1e-05,,",
  "0.04,256,7.9e-05,0.04,0.0056,0.0056,0,1e-05,,",
  "0.028,384,3.9e-05,0.028,0.0028,0.0028,0,5.2e-06,,",
  "0.02,512,2e-05,0.02,0.0015,0.0015,1.18,2.6e-06,,",
  "# L1_slope,1,residual,0",
].join("\n");

const DIAG = [
  "t,mass,energy,lambda_eps,dissipation,E_rel,F_bulk,L1_error,Q1,Q2,Q3,Q4",
  ...Array.from({ length: 9 }, (_, i) =>
    [i * 0.0125, 1.327, 4.23 - 0.01 * i, 1.48 + 0.005 * i, 0.9, 0.0106,
      0.00021, 0.0226, 0.02, 0.002, 0.01, 0.0005].join(","),
  ),
].join("\n");

function shellCsv(): string {
  const rows = ["condition,shell_radius,max_residual,fitted_order"];
  const conds = [
    ["eq09_div_B", 1.08],
    ["eq10_xixi_grad_B", 0.07],
    ["eq11_transport_theta", 0.76],
    ["eq12_transport_xi_sq", 2.62],
    ["eq13_transport_xi", 2.36],
    ["eq14_geometric_evolution", 1.04],
  ] as const;
  for (const [name, order] of conds) {
    for (let k = 0; k < 5; k++) {
      const r = 0.01 * Math.pow(1.45, k);
      rows.push(`${name},${r},${1e-3 * Math.pow(r / 0.01, order)},${order}`);
    }
  }
  return rows.join("\n");
}

describe("render", () => {
  it("slope plot annotates the fitted slope to two decimals", () => {
    const svg = render(parseCsv(SWEEP), parseSpec({
      kind: "slope", input: "x", output: "y", x: "eps", y: "sup_L1",
    }));
    expect(svg).toContain("<svg");
    expect(svg).toContain("slope 1.00");  // sup_L1 = eps exactly
  });

  it("slope plot matches fit_slope on the frozen noisy fixture", () => {
    const noisy = [
      "eps,value",
      "0.08,0.032491280362115724",
      "0.056,0.021264983516300708",
      "0.04,0.016611766707055806",
      "0.028,0.011739297965711673",
      "0.02,0.0072564431333461575",
    ].join("\n");
    const svg = render(parseCsv(noisy), parseSpec({
      kind: "slope", input: "x", output: "y", x: "eps", y: "value",
    }));
    expect(svg).toContain("slope 1.04");  // value from the simulator's fit
  });

  it("timeseries of a constant column renders a padded flat line", () => {
    const svg = render(parseCsv(DIAG), parseSpec({
      kind: "timeseries", input: "x", output: "y", y: "mass",
    }));
    expect(svg).toContain("polyline");
    expect(svg).toContain("mass");
  });

  it("timeseries overlays several columns", () => {
    const svg = render(parseCsv(DIAG), parseSpec({
      kind: "timeseries", input: "x", output: "y",
      y: ["lambda_eps", "energy"],
    }));
    expect(svg).toContain("lambda_eps");
    expect(svg).toContain("energy");
  });

  it("shell-decay renders one panel per condition with its fitted order", () => {
    const svg = render(parseCsv(shellCsv()), parseSpec({
      kind: "shell-decay", input: "x", output: "y",
    }));
    for (const name of ["eq09_div_B", "eq10_xixi_grad_B", "eq11_transport_theta",
                        "eq12_transport_xi_sq", "eq13_transport_xi",
                        "eq14_geometric_evolution"]) {
      expect(svg).toContain(name);
    }
    expect(svg).toContain("fitted order 2.62");
  });

  it("is idempotent: re-rendering gives identical bytes", () => {
    const spec = parseSpec({ kind: "slope", input: "x", output: "y", y: "sup_L1" });
    expect(render(parseCsv(SWEEP), spec)).toBe(render(parseCsv(SWEEP), spec));
  });

  it("raises the named-column error with available headers", () => {
    expect(() =>
      render(parseCsv(SWEEP), parseSpec({
        kind: "slope", input: "x", output: "y", y: "nope",
      })),
    ).toThrow(/available columns.*sup_L1/);
  });

  it("rejects malformed specs", () => {
    expect(() => parseSpec({ kind: "pie", input: "a", output: "b" })).toThrow(SpecError);
    expect(() => parseSpec({ kind: "slope", output: "b" })).toThrow(/input/);
    expect(() => parseSpec({ kind: "slope", input: "a", output: "b", scales: { y: "sqrt" } }))
      .toThrow(/linear/);
  });
});

describe("cli", () => {
  it("renders a spec file end to end and again idempotently", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    writeFileSync(join(dir, "sweep.csv"), SWEEP);
    writeFileSync(join(dir, "spec.json"), JSON.stringify({
      kind: "slope", input: "sweep.csv", output: "slope.svg", y: "sup_L1",
    }));
    expect(runCli([join(dir, "spec.json")])).toBe(0);
    const first = readFileSync(join(dir, "slope.svg"), "utf8");
    expect(runCli([join(dir, "spec.json")])).toBe(0);
    expect(readFileSync(join(dir, "slope.svg"), "utf8")).toBe(first);
    expect(first).toContain("slope 1.00");
  });

  it("fails cleanly on a missing column", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    writeFileSync(join(dir, "sweep.csv"), SWEEP);
    writeFileSync(join(dir, "spec.json"), JSON.stringify({
      kind: "slope", input: "sweep.csv", output: "o.svg", y: "missing_col",
    }));
    expect(runCli([join(dir, "spec.json")])).toBe(1);
  });

  it("prints usage without a spec", () => {
    expect(runCli([])).toBe(2);
  });
});
