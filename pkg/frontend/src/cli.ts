#!/usr/bin/env node
/** plot --kind ser_vs_snr|ser_vs_pp|iter_cdf --in results.csv --out fig.svg
 *       [--detectors a,b] [--force]
 *
 * Never overwrites an existing output without --force; never mutates input.
 */

import { existsSync, readFileSync, writeFileSync } from "fs";
import { pathToFileURL } from "url";
import { FIGURE_KINDS, FigureKind, renderByKind } from "./figures.js";

interface Args {
  kind: FigureKind;
  input: string;
  output: string;
  detectors?: string[];
  force: boolean;
}

export function parseArgs(argv: string[]): Args {
  let kind: string | undefined;
  let input: string | undefined;
  let output: string | undefined;
  let detectors: string[] | undefined;
  let force = false;
  for (let i = 0; i < argv.length; i += 1) {
    const a = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`missing value for ${a}`);
      return argv[i];
    };
    if (a === "--kind") kind = next();
    else if (a === "--in") input = next();
    else if (a === "--out") output = next();
    else if (a === "--detectors") detectors = next().split(",").map((s) => s.trim()).filter(Boolean);
    else if (a === "--force") force = true;
    else throw new Error(`unknown argument ${a}`);
  }
  if (!kind || !input || !output) throw new Error("--kind, --in, and --out are required");
  if (!FIGURE_KINDS.includes(kind as FigureKind)) {
    throw new Error(`unknown kind '${kind}'; expected one of ${FIGURE_KINDS.join(", ")}`);
  }
  return { kind: kind as FigureKind, input, output, detectors, force };
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`plot: ${(err as Error).message}\n`);
    return 2;
  }
  try {
    if (existsSync(args.output) && !args.force) {
      process.stderr.write(`plot: ${args.output} exists; pass --force to overwrite\n`);
      return 1;
    }
    const text = readFileSync(args.input, "utf8");
    const svg = renderByKind(args.kind, text, args.detectors);
    writeFileSync(args.output, svg);
    process.stderr.write(`wrote ${args.output}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`plot: ${(err as Error).message}\n`);
    return 1;
  }
}

if (process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(run(process.argv.slice(2)));
}
