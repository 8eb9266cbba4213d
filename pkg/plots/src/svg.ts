/**
 * Minimal deterministic SVG line chart with a log-scale y axis.
 * No DOM, no dependencies: the output is a plain string, so re-rendering the
 * same data yields byte-identical images.
 */

export interface ChartSeries {
  label: string;
  xs: number[];
  ys: number[]; // positive values; plotted on log10 scale
}

export interface ChartOptions {
  width?: number;
  height?: number;
  xLabel?: string;
  yLabel?: string;
  title?: string;
}

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

const MARGIN = { top: 34, right: 16, bottom: 46, left: 64 };
const Y_FLOOR = 1e-16;

function fmt(v: number): string {
  return v.toFixed(2);
}

function tickLabel(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 1e5 || abs < 1e-3) return v.toExponential(0);
  return String(Math.round(v * 1000) / 1000);
}

function niceLinearTicks(lo: number, hi: number, count = 5): number[] {
  if (hi <= lo) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / (count * step);
  const mult = err >= 7.5 ? 10 : err >= 3 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / s) * s; t <= hi + 1e-12 * span; t += s) {
    ticks.push(t);
  }
  return ticks;
}

export function renderChart(series: ChartSeries[], opts: ChartOptions = {}): string {
  const width = opts.width ?? 720;
  const height = opts.height ?? 460;
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;

  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const s of series) {
    for (const x of s.xs) {
      xMin = Math.min(xMin, x);
      xMax = Math.max(xMax, x);
    }
    for (const y of s.ys) {
      const v = Math.max(y, Y_FLOOR);
      yMin = Math.min(yMin, v);
      yMax = Math.max(yMax, v);
    }
  }
  if (xMax === xMin) xMax = xMin + 1;
  const logLo = Math.floor(Math.log10(yMin));
  const logHi = Math.ceil(Math.log10(yMax * 1.0000001));
  const toX = (x: number) => MARGIN.left + ((x - xMin) / (xMax - xMin)) * innerW;
  const toY = (y: number) => {
    const l = Math.log10(Math.max(y, Y_FLOOR));
    return MARGIN.top + (1 - (l - logLo) / Math.max(logHi - logLo, 1)) * innerH;
  };

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (opts.title) {
    parts.push(
      `<text x="${width / 2}" y="20" text-anchor="middle" font-size="14">${opts.title}</text>`,
    );
  }

  // y grid: one line per decade
  for (let e = logLo; e <= logHi; e++) {
    const y = fmt(toY(Math.pow(10, e)));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${width - MARGIN.right}" y2="${y}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${fmt(Number(y) + 4)}" text-anchor="end" ` +
        `font-size="10">1e${e}</text>`,
    );
  }
  for (const t of niceLinearTicks(xMin, xMax)) {
    const x = fmt(toX(t));
    parts.push(
      `<line x1="${x}" y1="${height - MARGIN.bottom}" x2="${x}" ` +
        `y2="${height - MARGIN.bottom + 4}" stroke="#333333"/>`,
    );
    parts.push(
      `<text x="${x}" y="${height - MARGIN.bottom + 16}" text-anchor="middle" ` +
        `font-size="10">${tickLabel(t)}</text>`,
    );
  }

  // axes
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}" ` +
      `fill="none" stroke="#333333"/>`,
  );
  if (opts.xLabel) {
    parts.push(
      `<text x="${MARGIN.left + innerW / 2}" y="${height - 10}" text-anchor="middle" ` +
        `font-size="12">${opts.xLabel}</text>`,
    );
  }
  if (opts.yLabel) {
    parts.push(
      `<text x="16" y="${MARGIN.top + innerH / 2}" text-anchor="middle" font-size="12" ` +
        `transform="rotate(-90 16 ${MARGIN.top + innerH / 2})">${opts.yLabel}</text>`,
    );
  }

  // polylines + legend
  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const pts = s.xs.map((x, i) => `${fmt(toX(x))},${fmt(toY(s.ys[i]))}`).join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5" ` +
        `data-label="${s.label}"/>`,
    );
    const ly = MARGIN.top + 14 + si * 16;
    const lx = MARGIN.left + 10;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 18}" y2="${ly - 4}" ` +
        `stroke="${color}" stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${lx + 24}" y="${ly}" font-size="11">${s.label}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
