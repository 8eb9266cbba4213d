/**
 * Render trace CSVs into one SVG convergence figure.
 *
 *   node dist/cli.js out.svg a.csv b.csv [--x epochs|bits_up|k]
 *                                        [--labels lsvrg,sgd] [--title t]
 */

import { basename } from "node:path";

import { renderFigure, XAxis } from "./figure.js";

function fail(msg: string): never {
  console.error(`error: ${msg}`);
  process.exit(2);
}

export function main(argv: string[]): number {
  const positional: string[] = [];
  let xAxis: XAxis = "epochs";
  let labels: string[] | null = null;
  let title: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--x") {
      const v = argv[++i];
      if (v !== "epochs" && v !== "bits_up" && v !== "k") {
        fail(`bad --x value ${v}`);
      }
      xAxis = v;
    } else if (a === "--labels") {
      labels = (argv[++i] ?? "").split(",");
    } else if (a === "--title") {
      title = argv[++i];
    } else if (a.startsWith("--")) {
      fail(`unknown flag ${a}`);
    } else {
      positional.push(a);
    }
  }
  if (positional.length < 2) {
    fail("usage: cli.js OUT.svg TRACE.csv [TRACE.csv ...] [--x AXIS] [--labels a,b]");
  }
  const [output, ...csvs] = positional;
  if (labels && labels.length !== csvs.length) {
    fail(`--labels has ${labels.length} entries for ${csvs.length} CSVs`);
  }
  const series = csvs.map((path, i) => ({
    path,
    label: labels ? labels[i] : basename(path).replace(/\.csv$/, ""),
  }));
  const figure = renderFigure({ series, xAxis, output, title });
  for (const s of figure.series) {
    console.log(`${s.label}: final f_gap = ${s.finalGap.toExponential(3)}`);
  }
  console.log(`wrote ${output}`);
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
