#!/usr/bin/env node
/**
 * plot <kind> <csv...> -o out.svg [--observable cspin|cpair]
 *      [--manifest manifest.json]
 */

import { readFileSync, writeFileSync } from "node:fs";
import { render, FigureKind } from "./plots.js";

function fail(msg: string): never {
  process.stderr.write(msg + "\n");
  process.exit(2);
}

export function main(argv: string[]): void {
  const args = [...argv];
  const kind = args.shift();
  if (!kind || !["energy", "correlations", "v0scan", "toy"].includes(kind)) {
    fail("usage: plot <energy|correlations|v0scan|toy> <csv...> -o out.svg");
  }
  const csvPaths: string[] = [];
  let out = "";
  let observable: "cspin" | "cpair" | undefined;
  let manifestPath = "";
  while (args.length) {
    const a = args.shift()!;
    if (a === "-o" || a === "--output") out = args.shift() ?? "";
    else if (a === "--observable") {
      const v = args.shift();
      if (v !== "cspin" && v !== "cpair") fail("--observable must be cspin or cpair");
      observable = v;
    } else if (a === "--manifest") manifestPath = args.shift() ?? "";
    else csvPaths.push(a);
  }
  if (!out) fail("missing -o output path");
  if (csvPaths.length === 0) fail("missing input CSV paths");

  let manifestHash: string | undefined;
  if (manifestPath) {
    const manifest = JSON.parse(readFileSync(manifestPath, "utf-8"));
    manifestHash = manifest.config_hash;
  }
  const svg = render({
    kind: kind as FigureKind,
    csvTexts: csvPaths.map((p) => readFileSync(p, "utf-8")),
    observable,
    manifestHash,
  });
  writeFileSync(out, svg);
}

main(process.argv.slice(2));
