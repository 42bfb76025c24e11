/** Strict parsing of the simulator's CSV outputs.
 *
 * results.csv rows feed the SER figures; trials.csv rows (written with
 * --trace) feed the iteration CDF. Missing required columns are an error,
 * never a silent omission.
 */

export interface ResultRow {
  detector: string;
  snr_db: number;
  pilot_power: number;
  csi_mode: string;
  frames: number;
  symbols: number;
  errors: number;
  ser: number;
  ci95: number;
}

export interface TrialRow {
  detector: string;
  snr_db: number;
  pilot_power: number;
  frame_index: number;
  unn_iters: number | null;
}

export const RESULTS_REQUIRED = [
  "detector",
  "snr_db",
  "pilot_power",
  "csi_mode",
  "frames",
  "symbols",
  "errors",
  "ser",
  "ci95",
] as const;

export const TRIALS_REQUIRED = [
  "detector",
  "snr_db",
  "pilot_power",
  "frame_index",
  "unn_iters",
] as const;

export class CsvError extends Error {}

interface Table {
  header: string[];
  rows: string[][];
}

function splitCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) throw new CsvError("empty CSV");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new CsvError(`row has ${row.length} cells, header has ${header.length}`);
    }
  }
  return { header, rows };
}

function columnIndex(header: string[], required: readonly string[]): Map<string, number> {
  const idx = new Map<string, number>();
  for (const name of required) {
    const at = header.indexOf(name);
    if (at < 0) throw new CsvError(`missing required column '${name}'`);
    idx.set(name, at);
  }
  return idx;
}

function num(cell: string, column: string): number {
  const v = Number(cell);
  if (cell === "" || Number.isNaN(v)) throw new CsvError(`non-numeric value '${cell}' in column '${column}'`);
  return v;
}

export function parseResultsCsv(text: string): ResultRow[] {
  const { header, rows } = splitCsv(text);
  const idx = columnIndex(header, RESULTS_REQUIRED);
  return rows.map((r) => ({
    detector: r[idx.get("detector")!],
    snr_db: num(r[idx.get("snr_db")!], "snr_db"),
    pilot_power: num(r[idx.get("pilot_power")!], "pilot_power"),
    csi_mode: r[idx.get("csi_mode")!],
    frames: num(r[idx.get("frames")!], "frames"),
    symbols: num(r[idx.get("symbols")!], "symbols"),
    errors: num(r[idx.get("errors")!], "errors"),
    ser: num(r[idx.get("ser")!], "ser"),
    ci95: num(r[idx.get("ci95")!], "ci95"),
  }));
}

export function parseTrialsCsv(text: string): TrialRow[] {
  const { header, rows } = splitCsv(text);
  const idx = columnIndex(header, TRIALS_REQUIRED);
  return rows.map((r) => {
    const it = r[idx.get("unn_iters")!];
    return {
      detector: r[idx.get("detector")!],
      snr_db: num(r[idx.get("snr_db")!], "snr_db"),
      pilot_power: num(r[idx.get("pilot_power")!], "pilot_power"),
      frame_index: num(r[idx.get("frame_index")!], "frame_index"),
      unn_iters: it === "" ? null : num(it, "unn_iters"),
    };
  });
}
