// Objective-space scatter for one iteration: evaluated candidates, the
// Pareto front, and a detail panel for the clicked front point. Pure
// payload -> markup; main.ts owns the event wiring.

import { FrontPayload, RecipePayload } from "../api.js";
import { escapeHtml, fmt, fmtValue } from "../format.js";

const W = 460;
const H = 360;
const PAD = 42;

interface Extent {
  min: number;
  max: number;
}

function extent(values: number[]): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!isFinite(min)) {
    min = 0;
    max = 1;
  }
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  return { min, max };
}

function scale(v: number, e: Extent, lo: number, hi: number): number {
  return lo + ((v - e.min) / (e.max - e.min)) * (hi - lo);
}

export function frontView(payload: FrontPayload, selectedPoint: number | null): string {
  const [o1, o2] = payload.outputs;
  const candVals = payload.candidates.map((c) => c.y);
  const frontVals = payload.points.map((p) => p.y);
  const all = candVals.concat(frontVals);
  const ex = extent(all.map((y) => y[o1]));
  const ey = extent(all.map((y) => y[o2]));

  const candidates = candVals
    .map((y) => {
      const cx = scale(y[o1], ex, PAD, W - PAD);
      const cy = scale(y[o2], ey, H - PAD, PAD);
      return `<circle class="candidate" cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" r="2.5"/>`;
    })
    .join("");

  const front = payload.points
    .map((p) => {
      const cx = scale(p.y[o1], ex, PAD, W - PAD);
      const cy = scale(p.y[o2], ey, H - PAD, PAD);
      const sel = selectedPoint === p.index ? " selected" : "";
      return (
        `<circle class="front-point${sel}" data-point="${p.index}" ` +
        `cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" r="4.5">` +
        `<title>${escapeHtml(o1)}=${fmt(p.y[o1])}, ${escapeHtml(o2)}=${fmt(p.y[o2])}</title></circle>`
      );
    })
    .join("");

  const axis =
    `<line class="axis" x1="${PAD}" y1="${H - PAD}" x2="${W - PAD}" y2="${H - PAD}"/>` +
    `<line class="axis" x1="${PAD}" y1="${PAD}" x2="${PAD}" y2="${H - PAD}"/>` +
    `<text class="axis-label" x="${W / 2}" y="${H - 8}">${escapeHtml(o1)}</text>` +
    `<text class="axis-label vertical" x="14" y="${H / 2}" transform="rotate(-90 14 ${H / 2})">${escapeHtml(o2)}</text>` +
    `<text class="tick" x="${PAD}" y="${H - PAD + 14}">${fmt(ex.min)}</text>` +
    `<text class="tick" x="${W - PAD}" y="${H - PAD + 14}" text-anchor="end">${fmt(ex.max)}</text>` +
    `<text class="tick" x="${PAD - 4}" y="${H - PAD}" text-anchor="end">${fmt(ey.min)}</text>` +
    `<text class="tick" x="${PAD - 4}" y="${PAD + 4}" text-anchor="end">${fmt(ey.max)}</text>`;

  return (
    `<div class="front-view" data-k="${payload.k}">` +
    `<h3>Objective space — iteration ${payload.k}</h3>` +
    `<svg viewBox="0 0 ${W} ${H}" class="front-scatter">${axis}${candidates}${front}</svg>` +
    `<p class="legend"><span class="legend-candidate">●</span> candidates ` +
    `<span class="legend-front">●</span> Pareto front (${payload.points.length})</p>` +
    `</div>`
  );
}

export function kSlider(latestK: number, selectedK: number | null): string {
  const value = selectedK === null ? latestK : selectedK;
  const live = selectedK === null ? " (live)" : "";
  return (
    `<div class="k-slider">` +
    `<label>iteration <input type="range" min="1" max="${Math.max(latestK, 1)}" ` +
    `value="${value}" data-role="k-slider"/> ` +
    `<span class="k-value">${value}${live}</span></label>` +
    `<button data-role="k-live">follow live</button>` +
    `</div>`
  );
}

export function pointDetail(
  payload: FrontPayload,
  pointIndex: number,
  recipePreview: RecipePayload | null,
): string {
  const point = payload.points.find((p) => p.index === pointIndex);
  if (!point) {
    return `<div class="point-detail empty">point ${pointIndex} is not on this front</div>`;
  }
  const inputs = Object.entries(point.x)
    .map(([name, v]) => `<tr><td>${escapeHtml(name)}</td><td>${fmtValue(v)}</td></tr>`)
    .join("");
  const outputs = payload.outputs
    .map((name) => {
      const band = recipePreview ? recipePreview.bands[name] : null;
      const bandText = band !== null && band !== undefined ? ` ± ${fmt(band)}` : "";
      return `<tr><td>${escapeHtml(name)}</td><td>${fmt(point.y[name])}${bandText}</td></tr>`;
    })
    .join("");
  return (
    `<div class="point-detail" data-point="${pointIndex}">` +
    `<h4>Front point ${pointIndex}</h4>` +
    `<table class="kv"><caption>reduced inputs</caption>${inputs}</table>` +
    `<table class="kv"><caption>predicted outputs</caption>${outputs}</table>` +
    `<button data-role="export-recipe" data-point="${pointIndex}">export recipe</button>` +
    `</div>`
  );
}
