/**
 * Per-figure plot builders: group the CSV rows into series, aggregate noise
 * draws, and attach the caption's reference lines.  All numbers come from the
 * CSV — nothing is recomputed here.
 */
import { PanelSpec, Point, RefLine, Series } from "./chart.js";
import { ResultRow } from "./schema.js";

const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const color = (i: number) => PALETTE[i % PALETTE.length];

function geomean(vals: number[]): number {
  return Math.exp(vals.reduce((a, v) => a + Math.log(v), 0) / vals.length);
}

function groupBy<T>(items: T[], keyOf: (item: T) => string): Map<string, T[]> {
  const out = new Map<string, T[]>();
  for (const item of items) {
    const key = keyOf(item);
    if (!out.has(key)) out.set(key, []);
    out.get(key)!.push(item);
  }
  return out;
}

/** One series per group label; within a series, draws sharing an x value are
 * geometric-averaged (costs span many orders of magnitude). */
function aggregated(
  rows: ResultRow[],
  labelOf: (r: ResultRow) => string,
  xOf: (r: ResultRow) => number | null,
  yOf: (r: ResultRow) => number | null = (r) => r.N_U,
): Series[] {
  const series: Series[] = [];
  for (const [label, members] of groupBy(rows, labelOf)) {
    const byX = new Map<number, number[]>();
    for (const r of members) {
      const x = xOf(r);
      const y = yOf(r);
      if (x === null || y === null || !Number.isFinite(x) || !Number.isFinite(y)) continue;
      if (!byX.has(x)) byX.set(x, []);
      byX.get(x)!.push(y);
    }
    const points: Point[] = [...byX.entries()]
      .map(([x, ys]) => ({ x, y: geomean(ys) }))
      .sort((a, b) => a.x - b.x);
    if (points.length > 0) {
      series.push({ label, points, color: color(series.length) });
    }
  }
  return series;
}

function scatter(
  rows: ResultRow[],
  labelOf: (r: ResultRow) => string,
  xOf: (r: ResultRow) => number | null,
  yOf: (r: ResultRow) => number | null,
): Series[] {
  const series: Series[] = [];
  for (const [label, members] of groupBy(rows, labelOf)) {
    const points: Point[] = [];
    for (const r of members) {
      const x = xOf(r);
      const y = yOf(r);
      if (x !== null && y !== null) points.push({ x, y });
    }
    if (points.length > 0) {
      series.push({ label, points, color: color(series.length), line: false });
    }
  }
  return series;
}

/** Straight guide y = c x^exponent in log-log space, with c anchored so the
 * line passes through the geometric center of the given series. */
function powerGuide(series: Series[], exponent: number, label: string,
                    dash = "6 4"): RefLine | null {
  const pts = series.flatMap((s) => s.points).filter((p) => p.x > 0 && p.y > 0);
  if (pts.length === 0) return null;
  const c = geomean(pts.map((p) => p.y / Math.pow(p.x, exponent)));
  const xs = pts.map((p) => p.x);
  const lo = Math.min(...xs);
  const hi = Math.max(...xs);
  return {
    label,
    dash,
    points: [
      { x: lo, y: c * Math.pow(lo, exponent) },
      { x: hi, y: c * Math.pow(hi, exponent) },
    ],
  };
}

/** Exact curve y = f(x) sampled over the data's x range (log spacing). */
function curveGuide(series: Series[], f: (x: number) => number, label: string,
                    opts: { dash?: string; color?: string } = {}): RefLine | null {
  const xs = series.flatMap((s) => s.points.map((p) => p.x)).filter((x) => x > 0);
  if (xs.length === 0) return null;
  const lo = Math.log(Math.min(...xs));
  const hi = Math.log(Math.max(...xs));
  const points: Point[] = [];
  for (let i = 0; i <= 40; i++) {
    const x = Math.exp(lo + ((hi - lo) * i) / 40);
    points.push({ x, y: f(x) });
  }
  return { label, points, dash: opts.dash ?? "6 4", color: opts.color };
}

/** Least-squares straight line through the aggregated series points. */
function linearFitGuide(series: Series[], label: string): RefLine | null {
  const pts = series.flatMap((s) => s.points);
  if (pts.length < 2) return null;
  const mx = pts.reduce((a, p) => a + p.x, 0) / pts.length;
  const my = pts.reduce((a, p) => a + p.y, 0) / pts.length;
  const sxx = pts.reduce((a, p) => a + (p.x - mx) ** 2, 0);
  const sxy = pts.reduce((a, p) => a + (p.x - mx) * (p.y - my), 0);
  const slope = sxy / sxx;
  const lo = Math.min(...pts.map((p) => p.x));
  const hi = Math.max(...pts.map((p) => p.x));
  return {
    label,
    points: [
      { x: lo, y: my + slope * (lo - mx) },
      { x: hi, y: my + slope * (hi - mx) },
    ],
  };
}

const defined = <T>(v: T | null): v is T => v !== null;

function panelsByNoise(
  rows: ResultRow[],
  labelOf: (r: ResultRow) => string,
  title: (noise: string) => string,
  refFor: (series: Series[], noise: string) => RefLine[],
): PanelSpec[] {
  const noises = [...new Set(rows.map((r) => r.noise_kind).filter(defined))].sort();
  return noises.map((noise) => {
    const sub = rows.filter((r) => r.noise_kind === noise);
    const series = aggregated(sub, labelOf, (r) => r.eps_target);
    return {
      title: title(noise),
      xLabel: "target infidelity eps",
      yLabel: "circuit cost N_U",
      xScale: "log" as const,
      yScale: "log" as const,
      series,
      refLines: refFor(series, noise),
    };
  });
}

type Builder = (rows: ResultRow[]) => PanelSpec[];

export const FIGURE_BUILDERS: Record<string, Builder> = {
  fig2: (rows) =>
    panelsByNoise(
      rows,
      (r) => `${r.mode} k=${r.k}`,
      (noise) => `HPFE cost vs infidelity (${noise} noise)`,
      (series) => {
        const thrifty = series.filter((s) => s.label.startsWith("thrifty"));
        const crm = series.filter((s) => s.label.startsWith("crm"));
        return [
          powerGuide(thrifty, -2, "~1/eps^2"),
          powerGuide(crm, 0, "constant", "2 3"),
        ].filter(defined);
      },
    ),

  fig3: (rows) => [{
    title: "CRM cost vs qubit count (magic chains, depolarizing)",
    xLabel: "qubits n",
    yLabel: "circuit cost N_U",
    xScale: "linear",
    yScale: "log",
    series: aggregated(rows, (r) => `${r.ensemble}`, (r) => r.n),
    refLines: [],
  }],

  figA1: (rows) =>
    panelsByNoise(
      rows,
      (r) => `${r.ensemble}/${r.mode} k=${r.k}`,
      (noise) => `Clifford vs 4-design cost (${noise} noise, R=d/eps^2)`,
      () => [],
    ),

  figA3: (rows) => {
    const series = scatter(rows, (r) => `${r.ensemble}`, (r) => r.eps, (r) => r.N_U);
    const cliff = series.filter((s) => s.label === "clifford");
    const four = series.filter((s) => s.label === "4design");
    return [{
      title: "Structured targets with a dephasing flip",
      xLabel: "infidelity eps",
      yLabel: "circuit cost N_U",
      xScale: "log",
      yScale: "log",
      series,
      refLines: [
        powerGuide(cliff, 0, "constant", "2 3"),
        powerGuide(four, -1, "~1/eps"),
      ].filter(defined),
    }];
  },

  figS1: (rows) => {
    const norm1sq = scatter(rows, (r) => `||Delta||_1^2 (${r.noise_kind})`,
                            (r) => r.eps, (r) => (r.delta1 === null ? null : r.delta1 ** 2));
    const norm2sq = scatter(rows, (r) => `||Delta||_2^2 (${r.noise_kind})`,
                            (r) => r.eps, (r) => r.delta2_sq);
    const all = [...norm1sq, ...norm2sq].map((s, i) => ({ ...s, color: color(i) }));
    return [{
      title: "Deviation norms vs infidelity",
      xLabel: "infidelity eps",
      yLabel: "squared deviation norm",
      xScale: "log",
      yScale: "log",
      series: all,
      refLines: [
        curveGuide(all, (x) => 4 * x, "4 eps", { dash: "" }),
        curveGuide(all, (x) => 4 * x * x, "4 eps^2", { dash: "6 4" }),
        curveGuide(all, (x) => 2 * x, "2 eps", { dash: "2 3", color: "#2050c0" }),
      ].filter(defined),
    }];
  },

  figS2: (rows) => {
    const series = scatter(rows, (r) => `${r.noise_kind}`,
                           (r) => r.eps, (r) => r.xi2_over_d);
    return [{
      title: "Cross-characteristic norm vs infidelity",
      xLabel: "infidelity eps",
      yLabel: "||Xi||_2^2 / d",
      xScale: "log",
      yScale: "log",
      series,
      refLines: [
        curveGuide(series, (x) => 2 * x, "2 eps (upper)", { dash: "" }),
        curveGuide(series, (x) => 2 * x * x, "2 eps^2 (lower)", { dash: "6 4" }),
      ].filter(defined),
    }];
  },

  figS3: (rows) => {
    const series = aggregated(rows, (r) => `${r.mode} k=${r.k}`, (r) => r.eps_target);
    return [{
      title: "Depolarizing closed-form benchmark",
      xLabel: "target infidelity eps",
      yLabel: "circuit cost N_U",
      xScale: "log",
      yScale: "log",
      series,
      refLines: [
        powerGuide(series.filter((s) => s.label.startsWith("thrifty")), -2, "~1/eps^2"),
      ].filter(defined),
    }];
  },

  figS4: (rows) => {
    const series = aggregated(rows, (r) => `${r.mode} k=${r.k}`, (r) => r.eps_target);
    return [{
      title: "Collective-rotation (coherent, correlated) noise",
      xLabel: "target infidelity eps",
      yLabel: "circuit cost N_U",
      xScale: "log",
      yScale: "log",
      series,
      refLines: [
        powerGuide(series.filter((s) => s.label.startsWith("crm")), -1, "~1/eps"),
      ].filter(defined),
    }];
  },

  figS5: (rows) => {
    const series = aggregated(rows, (r) => `theta=${r.theta?.toFixed(4)}`,
                              (r) => (r.M2 === null ? null : Math.pow(2, -r.M2)));
    return [{
      title: "CRM cost vs the stabilizer-entropy monotone",
      xLabel: "2^(-M2)",
      yLabel: "circuit cost N_U",
      xScale: "linear",
      yScale: "linear",
      series,
      refLines: [linearFitGuide(series, "linear fit")].filter(defined),
    }];
  },

  figS6: (rows) => [{
    title: "CRM cost vs infidelity at fixed reuse counts",
    xLabel: "target infidelity eps",
    yLabel: "circuit cost N_U",
    xScale: "log",
    yScale: "log",
    series: aggregated(rows, (r) => `k=${r.k} R=${r.R}`, (r) => r.eps_target),
    refLines: [],
  }],

  figS7: (rows) => [{
    title: "Cost as a function of the reuse count R",
    xLabel: "shots per circuit R",
    yLabel: "circuit cost N_U",
    xScale: "log",
    yScale: "log",
    series: aggregated(rows, (r) => `${r.mode} k=${r.k}`, (r) => r.R),
    refLines: [],
  }],

  figS8: (rows) => [{
    title: "GHZ with a single-qubit phase flip",
    xLabel: "qubits n",
    yLabel: "per-circuit variance V_R",
    xScale: "linear",
    yScale: "log",
    series: aggregated(rows, (r) => `${r.ensemble}`, (r) => r.n, (r) => r.V_R),
    refLines: [],
  }],

  figS9: (rows) => [{
    title: "Pauli observables of growing weight on GHZ",
    xLabel: "observable weight",
    yLabel: "circuit cost N_U",
    xScale: "linear",
    yScale: "log",
    series: aggregated(rows, (r) => `${r.ensemble}`, (r) => r.obs_weight),
    refLines: [],
  }],

  figS10: (rows) => [{
    title: "TFIM ground states: cost vs qubit count",
    xLabel: "qubits n",
    yLabel: "circuit cost N_U",
    xScale: "linear",
    yScale: "log",
    series: aggregated(rows, (r) => `${r.ensemble} h=${r.h}`, (r) => r.n),
    refLines: [],
  }],

  figS11: (rows) => [{
    title: "TFIM ground states: cost across the transition",
    xLabel: "transverse field h",
    yLabel: "circuit cost N_U",
    xScale: "linear",
    yScale: "log",
    series: aggregated(rows, (r) => `${r.ensemble} n=${r.n}`, (r) => r.h),
    refLines: [],
  }],
};

export const FIGURE_IDS = Object.keys(FIGURE_BUILDERS).sort();
