import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { colorFamily, siteParity } from "../src/colors.js";
import { parseCsv, SchemaError } from "../src/csv.js";
import { countCurves, curveColors, render } from "../src/plots.js";

const golden = join(dirname(fileURLToPath(import.meta.url)), "golden");
const load = (name: string) => readFileSync(join(golden, name), "utf-8");

describe("csv", () => {
  it("parses the versioned schema", () => {
    const t = parseCsv(load("energy.csv"));
    expect(t.columns).toEqual([
      "beta", "observable", "value", "stderr", "n_paths", "n_failed",
    ]);
    expect(t.rows.length).toBeGreaterThan(0);
  });

  it("rejects ragged rows", () => {
    expect(() => parseCsv("a,b\n1,2,3\n")).toThrow(SchemaError);
    expect(() => parseCsv("")).toThrow(SchemaError);
  });
});

describe("correlation panel", () => {
  const svg = render({ kind: "correlations", csvTexts: [load("correlations.csv")] });

  it("renders deterministically", () => {
    const again = render({
      kind: "correlations",
      csvTexts: [load("correlations.csv")],
    });
    expect(again).toBe(svg);
  });

  it("contains exactly 15 curves", () => {
    expect(countCurves(svg)).toBe(15);
  });

  it("colors split into parity families", () => {
    const labels = [...svg.matchAll(/data-label="cspin_(\d+_\d+)"/g)].map(
      (m) => m[1],
    );
    const colors = curveColors(svg);
    expect(labels.length).toBe(15);
    const families = new Set<string>();
    labels.forEach((site, i) => {
      expect(colorFamily(colors[i])).toBe(siteParity(site));
      families.add(siteParity(site));
    });
    expect(families).toEqual(new Set(["even", "odd"]));
  });

  it("can plot the pair quantity instead", () => {
    const pair = render({
      kind: "correlations",
      csvTexts: [load("correlations.csv")],
      observable: "cpair",
    });
    expect(countCurves(pair)).toBe(15);
    expect(pair).toContain("cpair");
  });

  it("rejects a schema mismatch", () => {
    expect(() =>
      render({ kind: "correlations", csvTexts: [load("ed.csv")] }),
    ).toThrow(SchemaError);
  });
});

describe("energy overlay", () => {
  it("draws the exact and monte carlo curves", () => {
    const svg = render({
      kind: "energy",
      csvTexts: [load("ed.csv"), load("energy.csv")],
      manifestHash: "abc123",
    });
    expect(countCurves(svg)).toBe(2);
    expect(svg).toContain("exact diagonalization");
    expect(svg).toContain("monte carlo");
    expect(svg).toContain("run abc123");
  });
});

describe("v0 scan", () => {
  it("plots the grid with an argmin marker", () => {
    const svg = render({ kind: "v0scan", csvTexts: [load("zerotemp.csv")] });
    expect(countCurves(svg)).toBe(1);
    expect(svg).toContain("argmin");
    expect(svg).toContain("<circle");
  });
});

describe("toy figure", () => {
  it("plots estimate and exact curves", () => {
    const svg = render({ kind: "toy", csvTexts: [load("toy.csv")] });
    expect(countCurves(svg)).toBe(2);
    const again = render({ kind: "toy", csvTexts: [load("toy.csv")] });
    expect(again).toBe(svg);
  });
});
