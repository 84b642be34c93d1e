/**
 * Plot model: groups CSV rows into series and fixes the axis domains.
 *
 * Data values are carried through exactly as parsed (no smoothing or
 * interpolation).  Zero-BER points cannot sit on a log axis, so they are
 * POSITIONED at the floor 1/(2 * trials_bits) and flagged `floored`; the
 * original value stays in `ber`.
 */

import { BerRow } from "./csv.js";

export interface PlotSpec {
  /** keep coded rows (iteration >= 1) instead of uncoded ones (iteration 0) */
  coded: boolean;
  /** restrict coded rows to one IDD iteration; null keeps all iterations */
  iteration: number | null;
  /** optional detector -> CSS color overrides */
  styles?: Record<string, string>;
}

export interface PlotPoint {
  snrDb: number;
  ber: number;            // exact CSV value
  ciHalfwidth: number;    // exact CSV value
  trialsBits: number;
  plotValue: number;      // value used for the log-axis position
  floored: boolean;
}

export interface PlotSeries {
  label: string;
  detector: string;
  iteration: number | null;
  color: string;
  points: PlotPoint[];
}

export interface PlotModel {
  series: PlotSeries[];
  xDomain: [number, number];
  yDomain: [number, number];   // decade-aligned, strictly positive
}

export class PlotDataError extends Error {}

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

function floorValue(row: BerRow): number {
  return 1.0 / (2.0 * Math.max(row.trials_bits, 1));
}

export function buildPlotModel(rows: BerRow[], spec: PlotSpec): PlotModel {
  const selected = rows.filter((r) => {
    if (spec.coded) {
      return r.iteration >= 1 && (spec.iteration === null || r.iteration === spec.iteration);
    }
    return r.iteration === 0;
  });
  if (selected.length === 0) {
    throw new PlotDataError(
      spec.coded ? "no coded rows match the selection" : "no uncoded rows in the CSV");
  }

  // One series per detector; coded data without an iteration selector gets
  // one series per (detector, iteration).
  const keyOf = (r: BerRow) =>
    spec.coded && spec.iteration === null ? `${r.detector}#${r.iteration}` : r.detector;
  const groups = new Map<string, BerRow[]>();
  for (const row of selected) {
    const key = keyOf(row);
    if (!groups.has(key)) groups.set(key, []);
    groups.get(key)!.push(row);
  }

  const series: PlotSeries[] = [];
  let colorIdx = 0;
  for (const [key, groupRows] of groups) {
    const first = groupRows[0];
    const iteration = spec.coded
      ? (spec.iteration !== null ? spec.iteration : first.iteration)
      : null;
    const label = spec.coded && spec.iteration === null
      ? `${first.detector} (iteration ${first.iteration})`
      : first.detector;
    const color = spec.styles?.[first.detector] ?? PALETTE[colorIdx++ % PALETTE.length];
    const points = groupRows
      .slice()
      .sort((a, b) => a.snr_db - b.snr_db)
      .map((r) => ({
        snrDb: r.snr_db,
        ber: r.ber,
        ciHalfwidth: r.ci_halfwidth,
        trialsBits: r.trials_bits,
        plotValue: r.ber > 0 ? r.ber : floorValue(r),
        floored: r.ber <= 0,
      }));
    series.push({ label, detector: first.detector, iteration, color, points });
    void key;
  }
  series.sort((a, b) => a.label.localeCompare(b.label));

  const xs = selected.map((r) => r.snr_db);
  const values = series.flatMap((s) => s.points.map((p) => p.plotValue));
  const uppers = series.flatMap((s) =>
    s.points.map((p) => Math.max(p.plotValue, p.ber + p.ciHalfwidth)));
  const yLo = Math.pow(10, Math.floor(Math.log10(Math.min(...values))));
  const yHi = Math.pow(10, Math.ceil(Math.log10(Math.max(...uppers, 1e-300))));
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  return {
    series,
    xDomain: xLo === xHi ? [xLo - 1, xHi + 1] : [xLo, xHi],
    yDomain: [yLo, Math.max(yHi, yLo * 10)],
  };
}
