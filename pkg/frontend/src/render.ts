/** Top-level entry: figure id + CSV text -> complete SVG document. */
import { renderSvg } from "./chart.js";
import { FIGURE_BUILDERS, FIGURE_IDS } from "./figures.js";
import { parseResults, ResultRow } from "./schema.js";

export class RenderError extends Error {}

export function renderFigure(figure: string, csvText: string): string {
  const builder = FIGURE_BUILDERS[figure];
  if (!builder) {
    throw new RenderError(`unknown figure ${figure}; known: ${FIGURE_IDS.join(", ")}`);
  }
  const rows: ResultRow[] = parseResults(csvText);
  if (rows.length === 0) {
    throw new RenderError(`no data rows in CSV for ${figure}`);
  }
  const mismatched = rows.find((r) => r.figure !== figure);
  if (mismatched) {
    throw new RenderError(
      `CSV contains rows for figure ${mismatched.figure}, expected ${figure}`,
    );
  }
  const panels = builder(rows);
  if (panels.length === 0) {
    throw new RenderError(`figure ${figure} produced no panels`);
  }
  return renderSvg(panels);
}

export { FIGURE_IDS };
