/**
 * The four figure kinds, each a pure CSV -> SVG transformation.
 */

import { column, parseCsv, requireColumns, SchemaError, Table } from "./csv.js";
import { familyColor, siteParity } from "./colors.js";
import {
  axes,
  circle,
  document,
  linearScale,
  plotArea,
  polyline,
  text,
  ticks,
} from "./svg.js";

export type FigureKind = "energy" | "correlations" | "v0scan" | "toy";

export interface PlotSpec {
  kind: FigureKind;
  csvTexts: string[];
  /** correlations panels plot one quantity; default spin */
  observable?: "cspin" | "cpair";
  manifestHash?: string;
}

const MC_COLUMNS = ["beta", "observable", "value", "stderr", "n_paths", "n_failed"];
const ED_COLUMNS = ["beta", "energy_per_site", "cspin", "cpair"];
const ZEROTEMP_COLUMNS = ["row_kind", "amplitude", "v0_per_site", "energy_per_site"];

interface Series {
  label: string;
  color: string;
  xs: number[];
  ys: number[];
}

function renderSeries(
  series: Series[],
  title: string,
  xLabel: string,
  yLabel: string,
  extras: string[] = [],
  legendNote = "",
): string {
  const area = plotArea();
  const allX = series.flatMap((s) => s.xs);
  const allY = series.flatMap((s) => s.ys);
  const xLo = Math.min(...allX);
  const xHi = Math.max(...allX);
  const pad = (Math.max(...allY) - Math.min(...allY) || 1) * 0.08;
  const yLo = Math.min(...allY) - pad;
  const yHi = Math.max(...allY) + pad;
  const sx = linearScale(xLo, xHi, area.x0, area.x1);
  const sy = linearScale(yLo, yHi, area.y0, area.y1);

  const parts: string[] = [];
  parts.push(
    axes(
      xLabel,
      yLabel,
      ticks(xLo, xHi, 5).map((v) => [sx(v), v.toFixed(2)]),
      ticks(yLo, yHi, 5).map((v) => [sy(v), v.toFixed(2)]),
    ),
  );
  for (const s of series) {
    parts.push(
      polyline(
        s.xs.map(sx),
        s.ys.map(sy),
        s.color,
        "curve",
        ` data-label="${s.label}"`,
      ),
    );
  }
  parts.push(...extras);
  let y = 40;
  for (const s of series.slice(0, 18)) {
    parts.push(
      `<line x1="${area.x1 - 150}" y1="${y - 4}" x2="${area.x1 - 130}" y2="${y - 4}" stroke="${s.color}" stroke-width="2"/>`,
    );
    parts.push(text(area.x1 - 124, y, s.label, 10));
    y += 14;
  }
  if (legendNote) {
    parts.push(text(area.x0 + 4, 40, legendNote, 10));
  }
  return document(parts.join("\n"), title);
}

function numbers(table: Table, name: string): number[] {
  return column(table, name).map((v) => {
    const out = Number(v);
    if (Number.isNaN(out)) {
      throw new SchemaError(`non-numeric value ${v} in column ${name}`);
    }
    return out;
  });
}

function mcSeries(table: Table, wanted: (obs: string) => boolean): Map<string, Series> {
  requireColumns(table, MC_COLUMNS);
  const betas = numbers(table, "beta");
  const values = numbers(table, "value");
  const names = column(table, "observable");
  const out = new Map<string, Series>();
  names.forEach((obs, i) => {
    if (!wanted(obs)) return;
    if (!out.has(obs)) {
      out.set(obs, { label: obs, color: "black", xs: [], ys: [] });
    }
    const s = out.get(obs)!;
    s.xs.push(betas[i]);
    s.ys.push(values[i]);
  });
  return out;
}

function renderEnergy(spec: PlotSpec): string {
  const series: Series[] = [];
  for (const csv of spec.csvTexts) {
    const table = parseCsv(csv);
    if (table.columns.join(",") === ED_COLUMNS.join(",")) {
      series.push({
        label: "exact diagonalization",
        color: "green",
        xs: numbers(table, "beta"),
        ys: numbers(table, "energy_per_site"),
      });
    } else {
      const mc = mcSeries(table, (o) => o === "energy_per_site");
      for (const s of mc.values()) {
        s.label = "monte carlo";
        s.color = "blue";
        series.push(s);
      }
    }
  }
  if (series.length === 0) throw new SchemaError("no energy series found");
  return renderSeries(series, "energy per site vs beta", "beta", "E/N", [],
    legendNote(spec));
}

function renderCorrelations(spec: PlotSpec): string {
  const prefix = spec.observable ?? "cspin";
  const table = parseCsv(spec.csvTexts[0]);
  const mc = mcSeries(table, (o) => o.startsWith(prefix + "_"));
  if (mc.size === 0) {
    throw new SchemaError(`no ${prefix} observables in CSV`);
  }
  const labels = [...mc.keys()].sort();
  const byParity = { even: [] as string[], odd: [] as string[] };
  for (const lbl of labels) {
    byParity[siteParity(lbl.slice(prefix.length + 1))].push(lbl);
  }
  const series: Series[] = labels.map((lbl) => {
    const site = lbl.slice(prefix.length + 1);
    const parity = siteParity(site);
    const family = byParity[parity];
    const s = mc.get(lbl)!;
    s.color = familyColor(parity, family.indexOf(lbl), family.length);
    s.label = lbl;
    return s;
  });
  return renderSeries(series, `${prefix} vs beta by site`, "beta", prefix, [],
    legendNote(spec));
}

function renderV0Scan(spec: PlotSpec): string {
  const table = parseCsv(spec.csvTexts[0]);
  requireColumns(table, ZEROTEMP_COLUMNS);
  const kinds = column(table, "row_kind");
  const amps = column(table, "amplitude").map(Number);
  const v0 = column(table, "v0_per_site").map(Number);
  const energy = column(table, "energy_per_site");
  const xs: number[] = [];
  const ys: number[] = [];
  let argmin = NaN;
  let summaryEnergy = "";
  kinds.forEach((kind, i) => {
    if (kind === "grid") {
      xs.push(amps[i]);
      ys.push(v0[i]);
    } else if (kind === "summary") {
      argmin = amps[i];
      summaryEnergy = energy[i];
    }
  });
  if (xs.length === 0) throw new SchemaError("no grid rows in zerotemp CSV");
  const area = plotArea();
  const sx = linearScale(Math.min(...xs), Math.max(...xs), area.x0, area.x1);
  const pad = (Math.max(...ys) - Math.min(...ys) || 1) * 0.08;
  const sy = linearScale(Math.min(...ys) - pad, Math.max(...ys) + pad, area.y0, area.y1);
  const extras: string[] = [];
  if (Number.isFinite(argmin)) {
    const yAt = ys[xs.reduce((best, x, i) =>
      Math.abs(x - argmin) < Math.abs(xs[best] - argmin) ? i : best, 0)];
    extras.push(circle(sx(argmin), sy(yAt), 5, "red"));
    extras.push(text(sx(argmin) + 8, sy(yAt) - 8,
      `argmin ${argmin}, E/N ${summaryEnergy}`, 11));
  }
  const series = [{ label: "V0/N", color: "blue", xs, ys }];
  return renderSeries(series, "action density scan", "amplitude", "V0/N",
    extras, legendNote(spec));
}

function renderToy(spec: PlotSpec): string {
  const palette: Record<string, string> = {
    toy_exact: "green",
    toy_girsanov: "blue",
    toy_raw: "orange",
  };
  const series: Series[] = [];
  for (const csv of spec.csvTexts) {
    const mc = mcSeries(parseCsv(csv), (o) => o.startsWith("toy_"));
    for (const s of mc.values()) {
      s.color = palette[s.label] ?? "black";
      series.push(s);
    }
  }
  if (series.length === 0) throw new SchemaError("no toy observables found");
  series.sort((a, b) => a.label.localeCompare(b.label));
  return renderSeries(series, "scalar toy model", "beta", "<G>", [],
    legendNote(spec));
}

function legendNote(spec: PlotSpec): string {
  return spec.manifestHash ? `run ${spec.manifestHash}` : "";
}

export function render(spec: PlotSpec): string {
  if (spec.csvTexts.length === 0) {
    throw new SchemaError("at least one CSV is required");
  }
  switch (spec.kind) {
    case "energy":
      return renderEnergy(spec);
    case "correlations":
      return renderCorrelations(spec);
    case "v0scan":
      return renderV0Scan(spec);
    case "toy":
      return renderToy(spec);
    default:
      throw new SchemaError(`unknown figure kind ${(spec as PlotSpec).kind}`);
  }
}

export function countCurves(svg: string): number {
  return (svg.match(/class="curve"/g) ?? []).length;
}

export function curveColors(svg: string): string[] {
  return [...svg.matchAll(/class="curve" fill="none" stroke="([^"]+)"/g)].map(
    (m) => m[1],
  );
}
