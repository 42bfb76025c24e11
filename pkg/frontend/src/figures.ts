/** The three figure kinds: SER vs SNR (log y), SER vs pilot power (log y),
 * and the untrained-network iteration-count CDF. */

import { parseResultsCsv, parseTrialsCsv, ResultRow } from "./csv.js";
import { renderFigure, Series } from "./svg.js";

export type FigureKind = "ser_vs_snr" | "ser_vs_pp" | "iter_cdf";

export const FIGURE_KINDS: FigureKind[] = ["ser_vs_snr", "ser_vs_pp", "iter_cdf"];

function detectorOrder(rows: { detector: string }[]): string[] {
  return [...new Set(rows.map((r) => r.detector))].sort();
}

function filterDetectors<T extends { detector: string }>(rows: T[], detectors?: string[]): T[] {
  if (!detectors || detectors.length === 0) return rows;
  const want = new Set(detectors);
  return rows.filter((r) => want.has(r.detector));
}

function serSeries(rows: ResultRow[], xOf: (r: ResultRow) => number): Series[] {
  return detectorOrder(rows).map((det) => ({
    label: det,
    points: rows
      .filter((r) => r.detector === det)
      .map((r) => ({ x: xOf(r), y: r.ser, err: r.ci95 }))
      .sort((a, b) => a.x - b.x),
  }));
}

export function renderSerVsSnr(csvText: string, detectors?: string[]): string {
  const rows = filterDetectors(parseResultsCsv(csvText), detectors);
  return renderFigure(
    { title: "SER vs SNR", xLabel: "SNR (dB)", yLabel: "SER", logY: true },
    serSeries(rows, (r) => r.snr_db),
  );
}

export function renderSerVsPilotPower(csvText: string, detectors?: string[]): string {
  const rows = filterDetectors(parseResultsCsv(csvText), detectors);
  return renderFigure(
    { title: "SER vs pilot power", xLabel: "pilot power (linear)", yLabel: "SER", logY: true },
    serSeries(rows, (r) => r.pilot_power),
  );
}

export function renderIterCdf(csvText: string, detectors?: string[]): string {
  const rows = filterDetectors(parseTrialsCsv(csvText), detectors).filter(
    (r) => r.unn_iters !== null,
  );
  const series: Series[] = detectorOrder(rows).map((det) => {
    const iters = rows
      .filter((r) => r.detector === det)
      .map((r) => r.unn_iters as number)
      .sort((a, b) => a - b);
    const n = iters.length;
    return {
      label: det,
      points: iters.map((it, i) => ({ x: it, y: (i + 1) / n })),
    };
  });
  return renderFigure(
    {
      title: "CDF of iteration counts",
      xLabel: "iterations",
      yLabel: "empirical CDF",
      logY: false,
      stepped: true,
    },
    series,
  );
}

export function renderByKind(kind: FigureKind, csvText: string, detectors?: string[]): string {
  switch (kind) {
    case "ser_vs_snr":
      return renderSerVsSnr(csvText, detectors);
    case "ser_vs_pp":
      return renderSerVsPilotPower(csvText, detectors);
    case "iter_cdf":
      return renderIterCdf(csvText, detectors);
  }
}
