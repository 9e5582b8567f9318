// Feature-curation editor: the nested-model RMSE curves (train/test) with
// the chosen k marked, plus a checkbox list of ranked features with the
// automatic choice pre-checked. Checkbox edits become the override payload.

import { CurvePayload } from "../api.js";
import { escapeHtml, fmt } from "../format.js";

const W = 460;
const H = 200;
const PAD = 44;

export function curveChart(payload: CurvePayload): string {
  const pts = payload.curve.points.filter((p) => !p.failed);
  if (pts.length === 0) {
    return `<div class="curve-chart empty">no usable curve points</div>`;
  }
  const kMax = Math.max(...payload.curve.points.map((p) => p.k));
  const values = pts.flatMap((p) => [p.rmse_train as number, p.rmse_test as number]);
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const sx = (k: number) => PAD + ((k - 1) / Math.max(kMax - 1, 1)) * (W - 2 * PAD);
  const sy = (v: number) => H - 28 - ((v - min) / (max - min)) * (H - 44);
  const line = (pick: (p: (typeof pts)[0]) => number, cls: string) =>
    `<polyline class="${cls}" points="${pts.map((p) => `${sx(p.k).toFixed(1)},${sy(pick(p)).toFixed(1)}`).join(" ")}"/>`;
  const dots = pts
    .map(
      (p) =>
        `<circle class="curve-dot" data-k="${p.k}" cx="${sx(p.k).toFixed(1)}" cy="${sy(p.rmse_test as number).toFixed(1)}" r="3">` +
        `<title>k=${p.k}: test ${fmt(p.rmse_test)}, train ${fmt(p.rmse_train)}</title></circle>`,
    )
    .join("");
  const chosenX = sx(payload.curve.chosen_k).toFixed(1);
  return (
    `<figure class="curve-chart">` +
    `<figcaption>nested-model RMSE by feature count (chosen k = ${payload.curve.chosen_k})</figcaption>` +
    `<svg viewBox="0 0 ${W} ${H}">` +
    `<line class="axis" x1="${PAD}" y1="${H - 28}" x2="${W - PAD}" y2="${H - 28}"/>` +
    `<line class="chosen-k" x1="${chosenX}" y1="14" x2="${chosenX}" y2="${H - 28}"/>` +
    line((p) => p.rmse_train as number, "series train") +
    line((p) => p.rmse_test as number, "series test") +
    dots +
    `<text class="tick" x="${PAD}" y="${H - 12}">k=1</text>` +
    `<text class="tick" x="${W - PAD}" y="${H - 12}" text-anchor="end">k=${kMax}</text>` +
    `<text class="tick" x="${PAD - 4}" y="${H - 28}" text-anchor="end">${fmt(min)}</text>` +
    `<text class="tick" x="${PAD - 4}" y="18" text-anchor="end">${fmt(max)}</text>` +
    `</svg>` +
    `<p class="legend"><span class="legend-train">—</span> train <span class="legend-test">—</span> test</p>` +
    `</figure>`
  );
}

export function featureChecklist(
  payload: CurvePayload,
  draftAdd: string[],
  draftRemove: string[],
  editable: boolean,
): string {
  const ranking = payload.ranking?.entries ?? [];
  const auto = new Set(payload.curve.chosen_features);
  const rows = ranking
    .map((entry) => {
      const autoChecked = auto.has(entry.name);
      const checked = (autoChecked && !draftRemove.includes(entry.name)) || draftAdd.includes(entry.name);
      return (
        `<li><label>` +
        `<input type="checkbox" data-role="feature" data-feature="${escapeHtml(entry.name)}" ` +
        `data-auto="${autoChecked}" ${checked ? "checked" : ""}${editable ? "" : " disabled"}/> ` +
        `<span class="feature-name">${escapeHtml(entry.name)}</span>` +
        `<span class="score">${fmt(entry.score)}</span>` +
        `</label></li>`
      );
    })
    .join("");
  const payloadPreview = `add: [${draftAdd.join(", ")}] remove: [${draftRemove.join(", ")}]`;
  return (
    `<div class="feature-checklist">` +
    `<h4>ranked features (auto-chosen pre-checked)</h4>` +
    `<ol>${rows}</ol>` +
    `<p class="override-preview" data-role="override-preview">${escapeHtml(payloadPreview)}</p>` +
    `<button data-role="override-submit"${editable ? "" : " disabled"}>apply selection</button>` +
    `</div>`
  );
}

// translate checkbox edits into the override payload: unchecking an
// auto-chosen feature removes it, checking a non-chosen one adds it
export function overridesFromChecks(
  autoChosen: string[],
  checked: string[],
): { add: string[]; remove: string[] } {
  const auto = new Set(autoChosen);
  const now = new Set(checked);
  const remove = autoChosen.filter((f) => !now.has(f));
  const add = checked.filter((f) => !auto.has(f));
  return { add, remove };
}
