/**
 * Minimal server-side SVG chart renderer: one XY panel with linear/log axes,
 * line and scatter series, dashed reference lines, and a legend.  Elements
 * carry stable class names (axis, series, refline) so tests can make
 * structural assertions on the output.
 */
import { extent } from "d3-array";
import { scaleLinear, scaleLog } from "d3-scale";

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  points: Point[];
  color: string;
  /** draw a connecting line (default true) */
  line?: boolean;
  /** draw point markers (default true) */
  markers?: boolean;
  dash?: string;
}

export interface RefLine {
  label: string;
  points: Point[];
  color?: string;
  dash?: string;
}

export type ScaleKind = "linear" | "log";

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  xScale: ScaleKind;
  yScale: ScaleKind;
  series: Series[];
  refLines?: RefLine[];
}

const WIDTH = 560;
const HEIGHT = 420;
const MARGIN = { top: 36, right: 16, bottom: 48, left: 72 };

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmtTick(value: number): string {
  const abs = Math.abs(value);
  if (abs !== 0 && (abs >= 1e4 || abs < 1e-3)) {
    return value.toExponential(0).replace("e+", "e");
  }
  return `${Number(value.toPrecision(4))}`;
}

function makeScale(kind: ScaleKind, domain: [number, number], range: [number, number]) {
  if (kind === "log") {
    return scaleLog().domain(domain).range(range).nice();
  }
  return scaleLinear().domain(domain).range(range).nice();
}

function dataExtent(spec: PanelSpec, axis: "x" | "y"): [number, number] {
  const vals: number[] = [];
  for (const s of [...spec.series, ...(spec.refLines ?? [])]) {
    for (const p of s.points) {
      const v = axis === "x" ? p.x : p.y;
      const scale = axis === "x" ? spec.xScale : spec.yScale;
      if (Number.isFinite(v) && (scale !== "log" || v > 0)) vals.push(v);
    }
  }
  const [lo, hi] = extent(vals);
  if (lo === undefined || hi === undefined) {
    throw new Error(`no plottable ${axis} values`);
  }
  return lo === hi ? [lo * 0.9 || -1, hi * 1.1 || 1] : [lo, hi];
}

/** Render one chart panel to an SVG fragment positioned at (ox, oy). */
export function renderPanel(spec: PanelSpec, ox = 0, oy = 0): string {
  if (spec.series.length === 0 || spec.series.every((s) => s.points.length === 0)) {
    throw new Error(`panel "${spec.title}" has no data series`);
  }
  const x = makeScale(spec.xScale, dataExtent(spec, "x"),
                      [MARGIN.left, WIDTH - MARGIN.right]);
  const y = makeScale(spec.yScale, dataExtent(spec, "y"),
                      [HEIGHT - MARGIN.bottom, MARGIN.top]);
  const parts: string[] = [`<g transform="translate(${ox},${oy})">`];

  // frame + title
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" ` +
    `width="${WIDTH - MARGIN.left - MARGIN.right}" ` +
    `height="${HEIGHT - MARGIN.top - MARGIN.bottom}" ` +
    `fill="none" stroke="#999"/>`,
    `<text class="title" x="${WIDTH / 2}" y="${MARGIN.top - 12}" ` +
    `text-anchor="middle" font-size="14">${esc(spec.title)}</text>`,
  );

  // axes with ticks
  const xTicks = x.ticks(spec.xScale === "log" ? 6 : 7)
    .filter((t: number) => spec.xScale !== "log" || Number.isInteger(Math.log10(t)));
  const yTicks = y.ticks(spec.yScale === "log" ? 6 : 7)
    .filter((t: number) => spec.yScale !== "log" || Number.isInteger(Math.log10(t)));
  parts.push(`<g class="axis axis-x" font-size="11">`);
  for (const t of xTicks) {
    const px = x(t);
    parts.push(
      `<line x1="${px}" y1="${HEIGHT - MARGIN.bottom}" x2="${px}" ` +
      `y2="${HEIGHT - MARGIN.bottom + 5}" stroke="#333"/>`,
      `<text x="${px}" y="${HEIGHT - MARGIN.bottom + 18}" text-anchor="middle">` +
      `${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${WIDTH / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-size="12">` +
    `${esc(spec.xLabel)}</text>`,
    `</g>`,
    `<g class="axis axis-y" font-size="11">`,
  );
  for (const t of yTicks) {
    const py = y(t);
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#333"/>`,
      `<text x="${MARGIN.left - 8}" y="${py + 4}" text-anchor="end">${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<text transform="rotate(-90)" x="${-HEIGHT / 2}" y="16" text-anchor="middle" ` +
    `font-size="12">${esc(spec.yLabel)}</text>`,
    `</g>`,
  );

  const inDomain = (p: Point) =>
    Number.isFinite(p.x) && Number.isFinite(p.y) &&
    (spec.xScale !== "log" || p.x > 0) && (spec.yScale !== "log" || p.y > 0);

  // reference lines under the data
  for (const ref of spec.refLines ?? []) {
    const pts = ref.points.filter(inDomain);
    if (pts.length < 2) continue;
    const path = pts.map((p) => `${x(p.x).toFixed(2)},${y(p.y).toFixed(2)}`).join(" ");
    const color = ref.color ?? "#c02020";
    parts.push(
      `<polyline class="refline" points="${path}" fill="none" stroke="${color}" ` +
      `stroke-dasharray="${ref.dash ?? "6 4"}" stroke-width="1.2"/>`,
      `<text class="refline-label" x="${x(pts[pts.length - 1].x).toFixed(2)}" ` +
      `y="${(y(pts[pts.length - 1].y) - 4).toFixed(2)}" font-size="10" ` +
      `fill="${color}" text-anchor="end">${esc(ref.label)}</text>`,
    );
  }

  // data series
  for (const s of spec.series) {
    const pts = s.points.filter(inDomain).sort((a, b) => a.x - b.x);
    if (pts.length === 0) continue;
    parts.push(`<g class="series" data-label="${esc(s.label)}">`);
    if (s.line !== false && pts.length > 1) {
      const path = pts.map((p) => `${x(p.x).toFixed(2)},${y(p.y).toFixed(2)}`).join(" ");
      parts.push(
        `<polyline points="${path}" fill="none" stroke="${s.color}" ` +
        `stroke-width="1.6"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`,
      );
    }
    if (s.markers !== false) {
      for (const p of pts) {
        parts.push(
          `<circle cx="${x(p.x).toFixed(2)}" cy="${y(p.y).toFixed(2)}" r="2.6" ` +
          `fill="${s.color}"/>`,
        );
      }
    }
    parts.push(`</g>`);
  }

  // legend
  parts.push(`<g class="legend" font-size="11">`);
  spec.series.forEach((s, i) => {
    const ly = MARGIN.top + 14 + 15 * i;
    const lx = MARGIN.left + 10;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 18}" y2="${ly - 4}" ` +
      `stroke="${s.color}" stroke-width="2"/>`,
      `<text x="${lx + 24}" y="${ly}">${esc(s.label)}</text>`,
    );
  });
  parts.push(`</g>`, `</g>`);
  return parts.join("\n");
}

/** Assemble one or more panels side by side into a complete SVG document. */
export function renderSvg(panels: PanelSpec[]): string {
  const total = WIDTH * panels.length;
  const body = panels.map((p, i) => renderPanel(p, i * WIDTH, 0)).join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${total}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${total} ${HEIGHT}" font-family="sans-serif">\n` +
    `<rect width="${total}" height="${HEIGHT}" fill="white"/>\n${body}\n</svg>\n`
  );
}

export const PANEL_WIDTH = WIDTH;
export const PANEL_HEIGHT = HEIGHT;
