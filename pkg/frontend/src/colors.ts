/**
 * Sublattice color families: sites with even coordinate sum draw from the
 * red-to-magenta ramp, odd coordinate sum from the blue-to-cyan ramp.
 */

export type Parity = "even" | "odd";

export function siteParity(label: string): Parity {
  // label is "jx_jy" (or "jx" in one dimension), 1-based coordinates
  const total = label
    .split("_")
    .map((c) => parseInt(c, 10))
    .reduce((a, b) => a + b, 0);
  return total % 2 === 0 ? "even" : "odd";
}

const EVEN_HUES = { from: 360, to: 300 }; // red -> magenta (descending arc)
const ODD_HUES = { from: 225, to: 175 };  // blue -> cyan

export function familyColor(parity: Parity, index: number, count: number): string {
  const ramp = parity === "even" ? EVEN_HUES : ODD_HUES;
  const t = count <= 1 ? 0 : index / (count - 1);
  const hue = Math.round(ramp.from + (ramp.to - ramp.from) * t);
  return `hsl(${hue},70%,45%)`;
}

export function hueOf(color: string): number {
  const m = color.match(/hsl\((\d+),/);
  if (!m) throw new Error(`not an hsl color: ${color}`);
  return parseInt(m[1], 10);
}

/** red..magenta family (even sublattice) vs blue..cyan family (odd). */
export function colorFamily(color: string): Parity {
  const hue = hueOf(color);
  return hue <= 60 || hue >= 280 ? "even" : "odd";
}
