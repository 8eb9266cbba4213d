/**
 * Convergence figures from trace CSVs: f - f* on a log scale against epochs,
 * uplink bits or the iteration counter.
 *
 * Building a figure is a pure function of the input CSVs (plus their JSON
 * sidecars for the epochs axis): the data points are plotted exactly at the
 * stride the CSV recorded, never interpolated, and rendering the same inputs
 * twice produces identical bytes.  All inputs are validated before anything
 * is written, so a bad CSV never leaves a half-written image behind.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { readManifest, readTraceCsv, TraceRow } from "./schema.js";
import { ChartSeries, renderChart } from "./svg.js";

export type XAxis = "epochs" | "bits_up" | "k";

export interface SeriesSpec {
  path: string;
  label: string;
  /** grad_evals per epoch (n*m); read from the JSON sidecar when omitted. */
  evalsPerEpoch?: number;
}

export interface FigureSpec {
  series: SeriesSpec[];
  xAxis: XAxis;
  output: string;
  title?: string;
}

export interface FigureSeries {
  label: string;
  xs: number[];
  ys: number[];
  finalGap: number;
}

export interface Figure {
  svg: string;
  series: FigureSeries[];
  xAxis: XAxis;
}

const X_LABELS: Record<XAxis, string> = {
  epochs: "epochs",
  bits_up: "uplink bits (total)",
  k: "iteration",
};

function xValues(rows: TraceRow[], spec: SeriesSpec, axis: XAxis): number[] {
  if (axis === "k") return rows.map((r) => r.k);
  if (axis === "bits_up") return rows.map((r) => r.bits_up);
  let perEpoch = spec.evalsPerEpoch;
  if (perEpoch === undefined) {
    const manifest = readManifest(spec.path);
    if (!manifest) {
      throw new Error(
        `${spec.path}: epochs axis needs evalsPerEpoch or a JSON sidecar`,
      );
    }
    perEpoch = manifest.problem.n * manifest.problem.m;
  }
  return rows.map((r) => r.grad_evals / perEpoch!);
}

export function buildFigure(spec: FigureSpec): Figure {
  if (spec.series.length === 0) {
    throw new Error("figure needs at least one series");
  }
  const series: FigureSeries[] = spec.series.map((s) => {
    const rows = readTraceCsv(s.path);
    const xs = xValues(rows, s, spec.xAxis);
    const ys = rows.map((r) => r.f_gap);
    return { label: s.label, xs, ys, finalGap: ys[ys.length - 1] };
  });
  const chart: ChartSeries[] = series.map((s) => ({
    label: s.label,
    xs: s.xs,
    ys: s.ys,
  }));
  const svg = renderChart(chart, {
    xLabel: X_LABELS[spec.xAxis],
    yLabel: "f(x) - f*",
    title: spec.title,
  });
  return { svg, series, xAxis: spec.xAxis };
}

export function renderFigure(spec: FigureSpec): Figure {
  const figure = buildFigure(spec); // validates everything before writing
  mkdirSync(dirname(spec.output), { recursive: true });
  writeFileSync(spec.output, figure.svg);
  return figure;
}
