import { describe, expect, it } from "vitest";

import { MissingColumnError, column, parseCsv, stringColumn } from "../src/csv.js";

const DIAG = [
  "t,mass,energy,lambda_eps,dissipation,E_rel,F_bulk,L1_error,Q1,Q2,Q3,Q4",
  "0,1.327,4.236,1.4831,0,0.01067,0.000212,0.0226,0.02,0.002,0.01,0.0005",
  "0.0125,1.327,4.215,1.4920,0.93,0.01063,0.000213,0.0228,0.02,0.002,0.01,0.0005",
].join("\n");

describe("parseCsv", () => {
  it("reads the diagnostics header and numeric columns", () => {
    const t = parseCsv(DIAG);
    expect(t.columns).toHaveLength(12);
    expect(t.rows).toBe(2);
    expect(column(t, "t")).toEqual([0, 0.0125]);
    expect(column(t, "lambda_eps")[1]).toBeCloseTo(1.492, 9);
  });

  it("keeps sweep-report footers out of the body", () => {
    const t = parseCsv(
      "eps,sup_L1\n0.08,0.0323\n0.02,0.0078\n# L1_slope,1.019,residual,0.014\n",
    );
    expect(t.rows).toBe(2);
    expect(t.footers).toHaveLength(1);
  });

  it("treats empty cells as NaN and keeps strings available", () => {
    const t = parseCsv("a,b\n1,\nx,2\n");
    expect(column(t, "b")[0]).toBeNaN();
    expect(column(t, "a")[1]).toBeNaN();
    expect(stringColumn(t, "a")).toEqual(["1", "x"]);
  });

  it("names the missing column and lists what exists", () => {
    const t = parseCsv(DIAG);
    try {
      column(t, "enthalpy");
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(MissingColumnError);
      expect((err as Error).message).toContain("enthalpy");
      expect((err as Error).message).toContain("lambda_eps");
    }
  });
});
