export { parseCsv, requireColumns, SchemaError } from "./csv.js";
export { colorFamily, familyColor, hueOf, siteParity } from "./colors.js";
export { countCurves, curveColors, render } from "./plots.js";
export type { FigureKind, PlotSpec } from "./plots.js";
