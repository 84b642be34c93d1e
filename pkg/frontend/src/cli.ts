#!/usr/bin/env node
/** CLI: render a BER waterfall SVG from a simulator CSV. */

import * as fs from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { parseBerCsv } from "./csv.js";
import { buildPlotModel } from "./model.js";
import { renderSvg } from "./svg.js";

export function main(argv: string[]): number {
  const args = yargs(argv)
    .scriptName("ber-plot")
    .command("plot", "render a BER figure from a results CSV")
    .option("csv", { type: "string", demandOption: true, describe: "input results CSV" })
    .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
    .option("coded", { type: "boolean", default: false,
                       describe: "plot coded rows (IDD iterations) instead of uncoded ones" })
    .option("iteration", { type: "number",
                           describe: "restrict coded curves to one IDD iteration" })
    .option("title", { type: "string", describe: "figure title" })
    .strict()
    .parseSync();

  let text: string;
  try {
    text = fs.readFileSync(args.csv, "utf-8");
  } catch (err) {
    process.stderr.write(`cannot read ${args.csv}: ${(err as Error).message}\n`);
    return 1;
  }
  try {
    const rows = parseBerCsv(text);
    const model = buildPlotModel(rows, {
      coded: args.coded,
      iteration: args.iteration ?? null,
    });
    const svg = renderSvg(model, { title: args.title });
    fs.writeFileSync(args.out, svg, "utf-8");
    process.stdout.write(`wrote ${args.out} (${model.series.length} curve(s))\n`);
    return 0;
  } catch (err) {
    // no output file is written on any data error
    process.stderr.write(`${(err as Error).message}\n`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("ber-plot")) {
  process.exit(main(hideBin(process.argv)));
}
