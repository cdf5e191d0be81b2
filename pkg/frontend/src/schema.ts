/**
 * Frozen CSV schema shared with the experiment pipeline.
 *
 * The producer writes exactly these columns in this order, with empty cells
 * for inapplicable fields.  Renderers must refuse files whose header or
 * schema_version does not match, rather than guessing.
 */
import Papa from "papaparse";

export const SCHEMA_VERSION = 1;

export const COLUMNS = [
  "schema_version", "figure", "ensemble", "mode", "state_family", "n", "k",
  "theta", "h", "obs_weight", "noise_kind", "draw", "eps_target", "eps", "r",
  "delta_sig", "R", "V", "V_star_rho", "V_star_delta", "V_R", "N_U", "method",
  "M2", "delta2_sq", "delta1", "xi2_over_d", "walltime_s",
] as const;

const STRING_COLUMNS = new Set([
  "figure", "ensemble", "mode", "state_family", "noise_kind", "method",
]);

export interface ResultRow {
  schema_version: number;
  figure: string;
  ensemble: string | null;
  mode: string | null;
  state_family: string | null;
  n: number | null;
  k: number | null;
  theta: number | null;
  h: number | null;
  obs_weight: number | null;
  noise_kind: string | null;
  draw: number | null;
  eps_target: number | null;
  eps: number | null;
  r: number | null;
  delta_sig: number | null;
  R: number | null;
  V: number | null;
  V_star_rho: number | null;
  V_star_delta: number | null;
  V_R: number | null;
  N_U: number | null;
  method: string | null;
  M2: number | null;
  delta2_sq: number | null;
  delta1: number | null;
  xi2_over_d: number | null;
  walltime_s: number | null;
}

export class SchemaError extends Error {}

/** Parse a results CSV, enforcing the frozen header and schema version. */
export function parseResults(csvText: string): ResultRow[] {
  const parsed = Papa.parse<string[]>(csvText.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`CSV parse error: ${parsed.errors[0].message}`);
  }
  const [header, ...records] = parsed.data;
  if (!header || header.join(",") !== COLUMNS.join(",")) {
    throw new SchemaError(
      `CSV header does not match the frozen schema (got: ${header?.join(",")})`,
    );
  }
  return records.map((cells, i) => {
    if (cells.length !== COLUMNS.length) {
      throw new SchemaError(`row ${i + 2}: expected ${COLUMNS.length} cells, got ${cells.length}`);
    }
    const row = {} as Record<string, string | number | null>;
    COLUMNS.forEach((name, j) => {
      const cell = cells[j];
      if (cell === "") {
        row[name] = null;
      } else if (STRING_COLUMNS.has(name)) {
        row[name] = cell;
      } else {
        const num = Number(cell);
        if (!Number.isFinite(num)) {
          throw new SchemaError(`row ${i + 2}: non-numeric value ${cell!} in column ${name}`);
        }
        row[name] = num;
      }
    });
    if (row.schema_version !== SCHEMA_VERSION) {
      throw new SchemaError(
        `row ${i + 2}: schema_version ${row.schema_version} != ${SCHEMA_VERSION}`,
      );
    }
    return row as unknown as ResultRow;
  });
}
