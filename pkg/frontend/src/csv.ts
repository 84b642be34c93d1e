/**
 * Parser for the simulator's BER result CSV.
 *
 * Schema (column order as written by the harness, extra columns tolerated):
 * detector,snr_db,iteration,trials_bits,bit_errors,ber,ci_halfwidth,seed
 */

export interface BerRow {
  detector: string;
  snr_db: number;
  iteration: number;
  trials_bits: number;
  bit_errors: number;
  ber: number;
  ci_halfwidth: number;
  seed: number;
}

export const REQUIRED_COLUMNS = [
  "detector", "snr_db", "iteration", "trials_bits",
  "bit_errors", "ber", "ci_halfwidth", "seed",
] as const;

const NUMERIC_COLUMNS = REQUIRED_COLUMNS.filter((c) => c !== "detector");

export class CsvError extends Error {}

/** Parse CSV text into rows; throws CsvError naming any missing column. */
export function parseBerCsv(text: string): BerRow[] {
  const lines = text.split(/\r?\n/).filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new CsvError("empty CSV: no header line");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const missing = REQUIRED_COLUMNS.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new CsvError(`missing column(s): ${missing.join(", ")}`);
  }
  const index = new Map(header.map((name, i) => [name, i]));

  const rows: BerRow[] = [];
  for (let ln = 1; ln < lines.length; ln++) {
    const cells = lines[ln].split(",");
    if (cells.length < header.length) {
      throw new CsvError(`row ${ln + 1}: expected ${header.length} cells, got ${cells.length}`);
    }
    const row: Record<string, string | number> = {
      detector: cells[index.get("detector")!].trim(),
    };
    for (const col of NUMERIC_COLUMNS) {
      const raw = cells[index.get(col)!].trim();
      const value = Number(raw);
      if (!Number.isFinite(value)) {
        throw new CsvError(`row ${ln + 1}: column ${col} is not a number: ${JSON.stringify(raw)}`);
      }
      row[col] = value;
    }
    rows.push(row as unknown as BerRow);
  }
  return rows;
}
