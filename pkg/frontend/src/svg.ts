/**
 * Deterministic SVG assembly: fixed canvas, fixed precision, no
 * timestamps, so identical input always yields identical bytes.
 */

export const WIDTH = 840;
export const HEIGHT = 520;
const MARGIN = { left: 64, right: 24, top: 28, bottom: 44 };

export interface Scale {
  (v: number): number;
}

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const s = v.toFixed(3);
  return s === "-0.000" ? "0.000" : s;
}

export function linearScale(
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
): Scale {
  const span = hi - lo || 1;
  return (v: number) => outLo + ((v - lo) / span) * (outHi - outLo);
}

export function plotArea(): {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
} {
  return {
    x0: MARGIN.left,
    x1: WIDTH - MARGIN.right,
    y0: HEIGHT - MARGIN.bottom,
    y1: MARGIN.top,
  };
}

export function polyline(
  xs: number[],
  ys: number[],
  stroke: string,
  cls: string,
  extra = "",
): string {
  const pts = xs.map((x, i) => `${fmt(x)},${fmt(ys[i])}`).join(" ");
  return `<polyline class="${cls}" fill="none" stroke="${stroke}" stroke-width="1.5" points="${pts}"${extra}/>`;
}

export function circle(x: number, y: number, r: number, fill: string): string {
  return `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`;
}

export function text(
  x: number,
  y: number,
  content: string,
  size = 12,
  anchor = "start",
): string {
  return `<text x="${fmt(x)}" y="${fmt(y)}" font-family="monospace" font-size="${size}" text-anchor="${anchor}">${escapeXml(content)}</text>`;
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function axes(
  xLabel: string,
  yLabel: string,
  xTicks: Array<[number, string]>,
  yTicks: Array<[number, string]>,
): string {
  const a = plotArea();
  const parts: string[] = [];
  parts.push(
    `<line x1="${a.x0}" y1="${a.y0}" x2="${a.x1}" y2="${a.y0}" stroke="black"/>`,
  );
  parts.push(
    `<line x1="${a.x0}" y1="${a.y0}" x2="${a.x0}" y2="${a.y1}" stroke="black"/>`,
  );
  for (const [px, label] of xTicks) {
    parts.push(
      `<line x1="${fmt(px)}" y1="${a.y0}" x2="${fmt(px)}" y2="${a.y0 + 5}" stroke="black"/>`,
    );
    parts.push(text(px, a.y0 + 18, label, 11, "middle"));
  }
  for (const [py, label] of yTicks) {
    parts.push(
      `<line x1="${a.x0 - 5}" y1="${fmt(py)}" x2="${a.x0}" y2="${fmt(py)}" stroke="black"/>`,
    );
    parts.push(text(a.x0 - 8, py + 4, label, 11, "end"));
  }
  parts.push(text((a.x0 + a.x1) / 2, HEIGHT - 8, xLabel, 12, "middle"));
  parts.push(text(14, (a.y0 + a.y1) / 2, yLabel, 12, "middle"));
  return parts.join("\n");
}

export function document(body: string, title: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    text(WIDTH / 2, 16, title, 13, "middle"),
    body,
    `</svg>`,
    "",
  ].join("\n");
}

export function ticks(lo: number, hi: number, n: number): number[] {
  const out: number[] = [];
  for (let i = 0; i <= n; i++) out.push(lo + ((hi - lo) * i) / n);
  return out;
}
