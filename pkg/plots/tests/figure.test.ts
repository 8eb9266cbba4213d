import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { buildFigure, renderFigure } from "../src/figure.js";

const REPO = resolve(__dirname, "..", "..");
const BUNDLE = join(REPO, "artifacts", "criterion4");
const METHODS = [
  "ec-gd",
  "ec-gdstar",
  "ec-gd-diana",
  "ec-lsvrgstar",
  "ec-lsvrg-diana",
];

function tmp(name: string): string {
  return join(mkdtempSync(join(tmpdir(), "efsgd-plots-")), name);
}

const SMALL = [
  "k,f_gap,dist2,bits_up,bits_down,grad_evals,sigma1_sq,sigma2_sq",
  "0,10.0,4.0,0,0,0,,",
  "10,1.0,0.4,640,1280,100,,",
  "20,0.05,0.02,1280,2560,200,,",
].join("\n");

describe("figures", () => {
  it("renders a single series against the iteration axis", () => {
    const csv = tmp("run.csv");
    writeFileSync(csv, SMALL);
    const out = tmp("fig.svg");
    const fig = renderFigure({
      series: [{ path: csv, label: "run" }],
      xAxis: "k",
      output: out,
    });
    expect(existsSync(out)).toBe(true);
    expect(fig.series).toHaveLength(1);
    expect(fig.series[0].finalGap).toBeCloseTo(0.05);
    expect(readFileSync(out, "utf8")).toContain('data-label="run"');
  });

  it("uses the sidecar manifest for the epochs axis", () => {
    const csv = tmp("run.csv");
    writeFileSync(csv, SMALL);
    writeFileSync(
      csv.replace(/\.csv$/, ".json"),
      JSON.stringify({ config: {}, problem: { name: "t", n: 5, m: 10 } }),
    );
    const fig = buildFigure({
      series: [{ path: csv, label: "run" }],
      xAxis: "epochs",
      output: "unused.svg",
    });
    expect(fig.series[0].xs).toEqual([0, 2, 4]);
  });

  it("is a pure function of its inputs", () => {
    const csv = tmp("run.csv");
    writeFileSync(csv, SMALL);
    const spec = {
      series: [{ path: csv, label: "run" }],
      xAxis: "k" as const,
      output: "unused.svg",
    };
    expect(buildFigure(spec).svg).toBe(buildFigure(spec).svg);
  });

  it("refuses an empty CSV and writes nothing", () => {
    const csv = tmp("empty.csv");
    writeFileSync(csv, "");
    const out = tmp("fig.svg");
    expect(() =>
      renderFigure({
        series: [{ path: csv, label: "x" }],
        xAxis: "k",
        output: out,
      }),
    ).toThrow(/empty/);
    expect(existsSync(out)).toBe(false);
  });

  it("names the offending columns on a schema mismatch", () => {
    const csv = tmp("bad.csv");
    writeFileSync(csv, "k,gap\n0,1\n");
    expect(() =>
      buildFigure({
        series: [{ path: csv, label: "x" }],
        xAxis: "k",
        output: "unused.svg",
      }),
    ).toThrow(/missing \[f_gap/);
  });
});

describe("criterion 10: the full-gradient compression bundle", () => {
  beforeAll(() => {
    if (METHODS.every((m) => existsSync(join(BUNDLE, `${m}.csv`)))) return;
    // regenerate the bundle through the simulator's CLI (its only interface)
    execFileSync(
      "python3",
      [
        "-m",
        "efsgd.cli",
        "run",
        join(REPO, "plans", "criterion4.plan"),
        "--out",
        BUNDLE,
        "--no-figures",
      ],
      { cwd: REPO, stdio: "inherit", timeout: 300_000 },
    );
  }, 320_000);

  it("renders the bundle with the expected final-value ordering", () => {
    const out = join(BUNDLE, "criterion4.svg");
    const fig = renderFigure({
      series: METHODS.map((m) => ({ path: join(BUNDLE, `${m}.csv`), label: m })),
      xAxis: "epochs",
      output: out,
      title: "full-gradient compression, synthetic instance",
    });
    expect(existsSync(out)).toBe(true);

    const finals = new Map(fig.series.map((s) => [s.label, s.finalGap]));
    // the star/shifted variants converge to the exact optimum...
    for (const m of ["ec-gdstar", "ec-gd-diana", "ec-lsvrgstar", "ec-lsvrg-diana"]) {
      expect(finals.get(m)!).toBeLessThan(1e-10);
    }
    // ...while plain error-compensated GD stalls at its noise floor
    expect(finals.get("ec-gd")!).toBeGreaterThan(1e-6);

    const svg = readFileSync(out, "utf8");
    for (const m of METHODS) {
      expect(svg).toContain(`data-label="${m}"`);
    }
  });
});
