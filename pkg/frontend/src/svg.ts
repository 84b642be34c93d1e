/**
 * SVG renderer for the BER plot model: linear SNR axis, log10 BER axis,
 * one polyline per series, confidence-interval bars and a legend.
 *
 * Every marker carries data-* attributes with the exact data values so the
 * rendered artifact remains machine-checkable.
 */

import { PlotModel, PlotPoint, PlotSeries } from "./model.js";

export interface RenderOptions {
  width?: number;
  height?: number;
  title?: string;
}

const MARGIN = { top: 36, right: 24, bottom: 52, left: 78 };

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function linearTicks(lo: number, hi: number, target = 8): number[] {
  const span = hi - lo;
  const rawStep = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= target) ?? mag * 10;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12; t += step) {
    ticks.push(Number(t.toFixed(10)));
  }
  return ticks;
}

function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.round(Math.log10(lo)); e <= Math.round(Math.log10(hi)); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

export function renderSvg(model: PlotModel, opts: RenderOptions = {}): string {
  const width = opts.width ?? 760;
  const height = opts.height ?? 520;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const [xLo, xHi] = model.xDomain;
  const [yLo, yHi] = model.yDomain;
  const lx = Math.log10(yLo);
  const ux = Math.log10(yHi);

  const x = (snr: number) => MARGIN.left + ((snr - xLo) / (xHi - xLo)) * plotW;
  const y = (v: number) =>
    MARGIN.top + plotH - ((Math.log10(Math.max(v, yLo)) - lx) / (ux - lx)) * plotH;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" data-y-scale="log10" data-x-scale="linear" ` +
    `font-family="sans-serif" font-size="12">`);
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (opts.title) {
    parts.push(`<text x="${width / 2}" y="20" text-anchor="middle" font-size="15">` +
      `${esc(opts.title)}</text>`);
  }

  // gridlines and axes
  for (const t of decadeTicks(yLo, yHi)) {
    const yy = y(t);
    parts.push(`<line x1="${MARGIN.left}" y1="${yy}" x2="${MARGIN.left + plotW}" ` +
      `y2="${yy}" stroke="#ddd" class="grid-y"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${yy + 4}" text-anchor="end" class="tick-y">` +
      `1e${Math.round(Math.log10(t))}</text>`);
  }
  for (const t of linearTicks(xLo, xHi)) {
    const xx = x(t);
    parts.push(`<line x1="${xx}" y1="${MARGIN.top}" x2="${xx}" ` +
      `y2="${MARGIN.top + plotH}" stroke="#eee" class="grid-x"/>`);
    parts.push(`<text x="${xx}" y="${MARGIN.top + plotH + 18}" text-anchor="middle" ` +
      `class="tick-x">${t}</text>`);
  }
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
    `fill="none" stroke="#444"/>`);
  parts.push(`<text x="${MARGIN.left + plotW / 2}" y="${height - 14}" text-anchor="middle">` +
    `SNR (dB)</text>`);
  parts.push(`<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
    `transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">BER</text>`);

  for (const s of model.series) {
    parts.push(renderSeries(s, x, y, yLo));
  }

  // legend
  const legendX = MARGIN.left + 12;
  let legendY = MARGIN.top + 14;
  for (const s of model.series) {
    parts.push(`<g class="legend-entry">` +
      `<line x1="${legendX}" y1="${legendY - 4}" x2="${legendX + 26}" y2="${legendY - 4}" ` +
      `stroke="${s.color}" stroke-width="2"/>` +
      `<text x="${legendX + 32}" y="${legendY}">${esc(s.label)}</text></g>`);
    legendY += 17;
  }
  parts.push("</svg>");
  return parts.join("\n");
}

function renderSeries(s: PlotSeries, x: (v: number) => number,
                      y: (v: number) => number, yFloor: number): string {
  const parts: string[] = [`<g class="series" data-label="${esc(s.label)}">`];
  const path = s.points.map((p, i) =>
    `${i === 0 ? "M" : "L"}${x(p.snrDb).toFixed(2)},${y(p.plotValue).toFixed(2)}`).join(" ");
  parts.push(`<path d="${path}" fill="none" stroke="${s.color}" stroke-width="1.8"/>`);
  for (const p of s.points) {
    parts.push(renderErrorBar(p, x, y, s.color, yFloor));
    parts.push(renderMarker(p, s, x, y));
  }
  parts.push("</g>");
  return parts.join("\n");
}

function renderErrorBar(p: PlotPoint, x: (v: number) => number,
                        y: (v: number) => number, color: string,
                        yFloor: number): string {
  if (p.ciHalfwidth <= 0) return "";
  const xx = x(p.snrDb);
  const hi = y(Math.max(p.ber + p.ciHalfwidth, yFloor));
  const lo = y(Math.max(p.ber - p.ciHalfwidth, yFloor));
  return `<g class="error-bar" data-ci="${p.ciHalfwidth}">` +
    `<line x1="${xx}" y1="${hi}" x2="${xx}" y2="${lo}" stroke="${color}"/>` +
    `<line x1="${xx - 4}" y1="${hi}" x2="${xx + 4}" y2="${hi}" stroke="${color}"/>` +
    `<line x1="${xx - 4}" y1="${lo}" x2="${xx + 4}" y2="${lo}" stroke="${color}"/></g>`;
}

function renderMarker(p: PlotPoint, s: PlotSeries, x: (v: number) => number,
                      y: (v: number) => number): string {
  const attrs = `class="marker${p.floored ? " floored" : ""}" ` +
    `data-detector="${esc(s.detector)}"` +
    (s.iteration !== null ? ` data-iteration="${s.iteration}"` : "") +
    ` data-snr="${p.snrDb}" data-ber="${p.ber}" data-plot-value="${p.plotValue}"`;
  const xx = x(p.snrDb).toFixed(2);
  const yy = y(p.plotValue).toFixed(2);
  if (p.floored) {
    // zero-BER points sit at the 1/(2 trials) floor with an open marker
    return `<circle ${attrs} cx="${xx}" cy="${yy}" r="4.5" fill="white" ` +
      `stroke="${s.color}" stroke-dasharray="2,1"/>`;
  }
  return `<circle ${attrs} cx="${xx}" cy="${yy}" r="3.5" fill="${s.color}"/>`;
}
