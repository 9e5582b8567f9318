// Prediction-slice explorer: a 1-D sweep with its uncertainty band and a
// 2-D heatmap per objective with archive points overlaid.

import { Slice1DPayload, Slice2DPayload } from "../api.js";
import { escapeHtml, fmt, fmtValue } from "../format.js";

const W = 460;
const H = 230;
const PAD = 46;

export function slice1DView(payload: Slice1DPayload, output: string): string {
  const pts = payload.points.filter((p) => typeof p.value === "number");
  if (pts.length === 0) {
    return `<div class="slice-1d empty">no numeric slice points</div>`;
  }
  const xs = pts.map((p) => p.value as number);
  const ys = pts.map((p) => p.predicted[output]);
  const bands = pts.map((p) => p.band[output] ?? 0);
  let min = Math.min(...ys.map((y, i) => y - bands[i]));
  let max = Math.max(...ys.map((y, i) => y + bands[i]));
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const sx = (v: number) => PAD + ((v - x0) / Math.max(x1 - x0, 1e-12)) * (W - 2 * PAD);
  const sy = (v: number) => H - 30 - ((v - min) / (max - min)) * (H - 46);

  const upper = pts.map((p, i) => `${sx(xs[i]).toFixed(1)},${sy(ys[i] + bands[i]).toFixed(1)}`);
  const lower = pts.map((p, i) => `${sx(xs[i]).toFixed(1)},${sy(ys[i] - bands[i]).toFixed(1)}`).reverse();
  const band = `<polygon class="band" points="${upper.concat(lower).join(" ")}"/>`;
  const line = `<polyline class="series" points="${pts
    .map((p, i) => `${sx(xs[i]).toFixed(1)},${sy(ys[i]).toFixed(1)}`)
    .join(" ")}"/>`;
  const dots = pts
    .map(
      (p, i) =>
        `<circle class="series-dot" cx="${sx(xs[i]).toFixed(1)}" cy="${sy(ys[i]).toFixed(1)}" r="2.5">` +
        `<title>${escapeHtml(payload.axis)}=${fmt(xs[i])}: ${fmt(ys[i])} ± ${fmt(bands[i])}</title></circle>`,
    )
    .join("");
  return (
    `<figure class="slice-1d" data-axis="${escapeHtml(payload.axis)}" data-output="${escapeHtml(output)}">` +
    `<figcaption>${escapeHtml(output)} along ${escapeHtml(payload.axis)} (others at base point)</figcaption>` +
    `<svg viewBox="0 0 ${W} ${H}">` +
    `<line class="axis" x1="${PAD}" y1="${H - 30}" x2="${W - PAD}" y2="${H - 30}"/>` +
    band +
    line +
    dots +
    `<text class="tick" x="${PAD}" y="${H - 14}">${fmt(x0)}</text>` +
    `<text class="tick" x="${W - PAD}" y="${H - 14}" text-anchor="end">${fmt(x1)}</text>` +
    `<text class="tick" x="${PAD - 4}" y="${H - 30}" text-anchor="end">${fmt(min)}</text>` +
    `<text class="tick" x="${PAD - 4}" y="20" text-anchor="end">${fmt(max)}</text>` +
    `</svg></figure>`
  );
}

function heatColor(t: number): string {
  // restrained blue -> yellow ramp
  const clamped = Math.max(0, Math.min(1, t));
  const r = Math.round(40 + 215 * clamped);
  const g = Math.round(60 + 170 * clamped);
  const b = Math.round(150 - 110 * clamped);
  return `rgb(${r},${g},${b})`;
}

export function slice2DView(payload: Slice2DPayload, output: string): string {
  const res = payload.resolution;
  const values = payload.cells.map((c) => c.predicted[output]);
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (min === max) {
    max = min + 1;
  }
  const cellW = (W - 2 * PAD) / res;
  const cellH = (H - 46) / res;
  const x0 = payload.x_values[0];
  const x1 = payload.x_values[payload.x_values.length - 1];
  const y0 = payload.y_values[0];
  const y1 = payload.y_values[payload.y_values.length - 1];

  const cells = payload.cells
    .map((cell) => {
      const i = payload.x_values.indexOf(cell.x);
      const j = payload.y_values.indexOf(cell.y);
      const px = PAD + i * cellW;
      const py = H - 30 - (j + 1) * cellH;
      const t = (cell.predicted[output] - min) / (max - min);
      const marker = cell.occupied
        ? `<circle class="archive-marker" cx="${(px + cellW / 2).toFixed(1)}" cy="${(py + cellH / 2).toFixed(1)}" r="3"/>`
        : "";
      return (
        `<g class="cell" data-x="${cell.x}" data-y="${cell.y}">` +
        `<rect x="${px.toFixed(1)}" y="${py.toFixed(1)}" width="${cellW.toFixed(1)}" height="${cellH.toFixed(1)}" ` +
        `fill="${heatColor(t)}"><title>${escapeHtml(payload.axes.x)}=${fmt(cell.x)}, ` +
        `${escapeHtml(payload.axes.y)}=${fmt(cell.y)}: ${fmt(cell.predicted[output])}</title></rect>` +
        marker +
        `</g>`
      );
    })
    .join("");

  return (
    `<figure class="slice-2d" data-output="${escapeHtml(output)}">` +
    `<figcaption>${escapeHtml(output)} over (${escapeHtml(payload.axes.x)}, ${escapeHtml(payload.axes.y)}) ` +
    `— ● archive point</figcaption>` +
    `<svg viewBox="0 0 ${W} ${H}">` +
    cells +
    `<text class="tick" x="${PAD}" y="${H - 14}">${fmt(x0)}</text>` +
    `<text class="tick" x="${W - PAD}" y="${H - 14}" text-anchor="end">${fmt(x1)}</text>` +
    `<text class="tick" x="${PAD - 4}" y="${H - 30}" text-anchor="end">${fmt(y0)}</text>` +
    `<text class="tick" x="${PAD - 4}" y="20" text-anchor="end">${fmt(y1)}</text>` +
    `<text class="axis-label" x="${W / 2}" y="${H - 2}">${escapeHtml(payload.axes.x)}</text>` +
    `</svg></figure>`
  );
}

export function axisPickers(
  features: string[],
  axisX: string | null,
  axisY: string | null,
  base: Record<string, number | string> | null,
  problems: string[],
): string {
  const options = (selected: string | null, allowNone: boolean) => {
    const none = allowNone ? `<option value="">(none: 1-D)</option>` : "";
    return (
      none +
      features
        .map(
          (f) =>
            `<option value="${escapeHtml(f)}"${f === selected ? " selected" : ""}>${escapeHtml(f)}</option>`,
        )
        .join("")
    );
  };
  const baseText = base
    ? Object.entries(base)
        .map(([k, v]) => `${k}=${fmtValue(v)}`)
        .join(", ")
    : "box midpoint";
  const problemList = problems.length
    ? `<ul class="problems">${problems.map((p) => `<li>${escapeHtml(p)}</li>`).join("")}</ul>`
    : "";
  return (
    `<div class="axis-pickers">` +
    `<label>x axis <select data-role="axis-x">${options(axisX, false)}</select></label>` +
    `<label>y axis <select data-role="axis-y">${options(axisY, true)}</select></label>` +
    `<p class="base-point">base: <span data-role="base-point">${escapeHtml(baseText)}</span></p>` +
    problemList +
    `</div>`
  );
}
