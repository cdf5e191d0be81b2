#!/usr/bin/env node
/**
 * Render a crmshadow experiment CSV into an SVG figure.
 *
 *   crmshadow-render render --figure fig2 --in out/fig2.csv --out fig2.svg
 *   crmshadow-render list
 *
 * Exit codes: 0 success, 2 bad input (unknown figure, schema mismatch, missing
 * file).
 */
import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { FIGURE_IDS, renderFigure } from "./render.js";

export function main(argv: string[]): number {
  let exitCode = 0;
  yargs(argv)
    .command(
      "render",
      "render one figure CSV to SVG",
      (y) =>
        y
          .option("figure", { type: "string", demandOption: true,
                              describe: "figure id (see `list`)" })
          .option("in", { type: "string", demandOption: true,
                          describe: "input CSV path" })
          .option("out", { type: "string", demandOption: true,
                           describe: "output SVG path" }),
      (args) => {
        try {
          const csv = readFileSync(args.in as string, "utf8");
          const svg = renderFigure(args.figure as string, csv);
          writeFileSync(args.out as string, svg);
          console.log(`wrote ${args.out}`);
        } catch (err) {
          console.error(`error: ${(err as Error).message}`);
          exitCode = 2;
        }
      },
    )
    .command("list", "list known figure ids", {}, () => {
      for (const id of FIGURE_IDS) console.log(id);
    })
    .demandCommand(1)
    .strict()
    .fail((msg) => {
      console.error(`error: ${msg}`);
      exitCode = 2;
    })
    .exitProcess(false)
    .parseSync();
  return exitCode;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.ts") || entry.endsWith("cli.js")) {
  process.exit(main(hideBin(process.argv)));
}
