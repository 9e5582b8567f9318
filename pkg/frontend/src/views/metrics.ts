// Three aligned time-series charts: hypervolume (performance), spacing
// (quality), Wasserstein drift (stability, starts at k=2). Failed metric
// iterations render as gaps, never as zeros.

import { MetricsEntry, MetricsPayload } from "../api.js";
import { escapeHtml, fmt } from "../format.js";

const W = 440;
const H = 120;
const PAD = 40;

function polyline(
  series: { k: number; value: number | null }[],
  kMax: number,
): { paths: string; points: string; min: number; max: number } {
  const present = series.filter((s) => s.value !== null) as { k: number; value: number }[];
  if (present.length === 0) {
    return { paths: "", points: "", min: 0, max: 1 };
  }
  let min = Math.min(...present.map((s) => s.value));
  let max = Math.max(...present.map((s) => s.value));
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const sx = (k: number) => PAD + ((k - 1) / Math.max(kMax - 1, 1)) * (W - 2 * PAD);
  const sy = (v: number) => H - 18 - ((v - min) / (max - min)) * (H - 30);

  // split into segments at gaps so failures show as breaks
  const segments: string[] = [];
  let current: string[] = [];
  for (const s of series) {
    if (s.value === null) {
      if (current.length > 1) segments.push(current.join(" "));
      current = [];
      continue;
    }
    current.push(`${sx(s.k).toFixed(1)},${sy(s.value).toFixed(1)}`);
  }
  if (current.length > 1) segments.push(current.join(" "));
  const paths = segments.map((pts) => `<polyline class="series" points="${pts}"/>`).join("");
  const points = present
    .map(
      (s) =>
        `<circle class="series-dot" data-k="${s.k}" cx="${sx(s.k).toFixed(1)}" cy="${sy(s.value).toFixed(1)}" r="2.5">` +
        `<title>k=${s.k}: ${fmt(s.value)}</title></circle>`,
    )
    .join("");
  return { paths, points, min, max };
}

function chart(title: string, series: { k: number; value: number | null }[], kMax: number): string {
  const { paths, points, min, max } = polyline(series, kMax);
  const last = [...series].reverse().find((s) => s.value !== null);
  const lastText = last ? `${fmt(last.value)}` : "–";
  return (
    `<figure class="metric-chart" data-metric="${escapeHtml(title)}">` +
    `<figcaption>${escapeHtml(title)} <span class="last-value">${lastText}</span></figcaption>` +
    `<svg viewBox="0 0 ${W} ${H}">` +
    `<line class="axis" x1="${PAD}" y1="${H - 18}" x2="${W - PAD}" y2="${H - 18}"/>` +
    `<text class="tick" x="${PAD - 4}" y="${H - 18}" text-anchor="end">${fmt(min)}</text>` +
    `<text class="tick" x="${PAD - 4}" y="14" text-anchor="end">${fmt(max)}</text>` +
    `${paths}${points}</svg></figure>`
  );
}

export function metricsView(payload: MetricsPayload): string {
  const series = payload.series;
  if (series.length === 0) {
    return `<div class="metrics-view empty">no iterations yet</div>`;
  }
  const kMax = Math.max(...series.map((s) => s.k));
  const hv = series.map((s) => ({ k: s.k, value: s.hypervolume }));
  const sp = series.map((s) => ({ k: s.k, value: s.spacing }));
  // drift starts at k=2; k=1 simply has no value
  const wd = series.filter((s) => s.k >= 2).map((s) => ({ k: s.k, value: s.wasserstein_to_previous }));
  const conv = lastDefined(series, (s) => s.convergence_diagnostic);
  return (
    `<div class="metrics-view">` +
    chart("hypervolume", hv, kMax) +
    chart("spacing", sp, kMax) +
    chart("wasserstein drift", wd, kMax) +
    `<p class="convergence">premature-convergence diagnostic: ` +
    `<span data-role="convergence">${fmt(conv)}</span> of the box within sigma of the front</p>` +
    `</div>`
  );
}

function lastDefined(series: MetricsEntry[], pick: (s: MetricsEntry) => number | null): number | null {
  for (let i = series.length - 1; i >= 0; i--) {
    const v = pick(series[i]);
    if (v !== null && v !== undefined) return v;
  }
  return null;
}
