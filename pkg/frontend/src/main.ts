// Browser bootstrap: owns the DOM, the long-poll loop, and event wiring.
// All rendering goes through the pure view functions; all numbers come from
// API payloads.

import { ApiClient, CurvePayload, FrontPayload, MetricsPayload } from "./api.js";
import { effectiveK, initialState, selectIteration, validateSliceAxes, ViewState } from "./state.js";
import { frontView, kSlider, pointDetail } from "./views/front.js";
import { metricsView } from "./views/metrics.js";
import { SteeringAck, steeringPanel } from "./views/steering.js";
import { curveChart, featureChecklist, overridesFromChecks } from "./views/curation.js";
import { axisPickers, slice1DView, slice2DView } from "./views/slice.js";

const api = new ApiClient(localStorage.getItem("doeopt-api") ?? "");

let state: ViewState = initialState();
let lastAck: SteeringAck | null = null;
let front: FrontPayload | null = null;
let metrics: MetricsPayload | null = null;
let curve: CurvePayload | null = null;
let polling = false;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

async function refreshRunList() {
  const { runs } = await api.listRuns();
  el("runs").innerHTML = runs
    .map(
      (r) =>
        `<li><button data-run="${r.run_id}" class="${r.run_id === state.runId ? "active" : ""}">` +
        `${r.run_id} <span class="status">${r.status}</span></button></li>`,
    )
    .join("");
}

async function selectRun(runId: string) {
  state = { ...initialState(), runId };
  lastAck = null;
  front = metrics = curve = null;
  await refreshAll();
  if (!polling) void pollLoop();
}

async function refreshAll() {
  if (!state.runId) return;
  const info = await api.getRun(state.runId);
  state.status = info.status;
  state.latestK = info.latest_k;
  try {
    curve = await api.getCurve(state.runId);
  } catch {
    curve = null;
  }
  try {
    metrics = await api.getMetrics(state.runId);
    front = await api.getFront(state.runId, effectiveK(state));
  } catch {
    metrics = null;
    front = null;
  }
  render();
}

async function pollLoop() {
  polling = true;
  while (state.runId) {
    try {
      const payload = await api.getIterations(state.runId, state.latestK, 20);
      state.status = payload.status;
      if (payload.records.length > 0) {
        state.latestK = payload.latest_k;
        metrics = await api.getMetrics(state.runId);
        if (state.selectedK === null) {
          front = await api.getFront(state.runId, undefined);
        }
        render();
      }
      if (["done", "failed"].includes(payload.status)) {
        await refreshAll();
        break;
      }
      if (payload.status === "selecting" && curve === null) {
        await refreshAll();
      }
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 1000));
    }
  }
  polling = false;
}

function render() {
  el("front-panel").innerHTML = front
    ? kSlider(state.latestK, state.selectedK) +
      frontView(front, state.selectedPoint) +
      (state.selectedPoint !== null ? pointDetail(front, state.selectedPoint, null) : "")
    : `<p class="empty">no front yet</p>`;
  el("metrics-panel").innerHTML = metrics ? metricsView(metrics) : `<p class="empty">no metrics yet</p>`;
  const rho = metrics?.series.length ? metrics.series[metrics.series.length - 1].rho : null;
  const sigma = metrics?.series.length ? metrics.series[metrics.series.length - 1].sigma : null;
  el("steering-panel").innerHTML = steeringPanel(state.status, rho, sigma, state.steering, lastAck);
  el("curation-panel").innerHTML = curve
    ? curveChart(curve) +
      featureChecklist(curve, state.overridesAdd, state.overridesRemove, state.status === "selecting")
    : `<p class="empty">no selection curve yet</p>`;
  void renderSlice();
  void refreshRunList();
}

async function renderSlice() {
  const panel = el("slice-panel");
  if (!state.runId || !curve || !["done", "optimizing", "paused"].includes(state.status)) {
    panel.innerHTML = `<p class="empty">slices appear once a model is trained</p>`;
    return;
  }
  const features = curve.curve.final_features;
  if (!state.sliceAxisX && features.length) state.sliceAxisX = features[0];
  const validation = validateSliceAxes(state.sliceAxisX, state.sliceAxisY);
  let charts = "";
  if (validation.ok && state.sliceAxisX) {
    try {
      if (state.sliceAxisY) {
        const payload = await api.getSlice2D(
          state.runId, state.sliceAxisX, state.sliceAxisY, 15, state.sliceBase ?? undefined);
        charts = Object.keys(payload.cells[0]?.predicted ?? {})
          .map((output) => slice2DView(payload, output))
          .join("");
      } else {
        const payload = await api.getSlice1D(state.runId, state.sliceAxisX, 25, state.sliceBase ?? undefined);
        charts = Object.keys(payload.points[0]?.predicted ?? {})
          .map((output) => slice1DView(payload, output))
          .join("");
      }
    } catch (err) {
      charts = `<p class="error">${String(err)}</p>`;
    }
  }
  panel.innerHTML =
    axisPickers(features, state.sliceAxisX, state.sliceAxisY,
      null, validation.problems) + charts;
}

function wireEvents() {
  document.body.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const runBtn = target.closest("[data-run]") as HTMLElement | null;
    if (runBtn) void selectRun(runBtn.dataset.run!);
    const point = target.closest(".front-point") as HTMLElement | null;
    if (point) {
      state.selectedPoint = Number(point.dataset.point);
      render();
    }
    if (target.dataset.role === "k-live") {
      state.selectedK = null;
      void refreshFront();
    }
    if (target.dataset.role === "steer-submit") void submitSteer({});
    if (target.dataset.role === "steer-pause") void submitSteer({ pause: true });
    if (target.dataset.role === "steer-resume") void submitSteer({ resume: true });
    if (target.dataset.role === "steer-stop") void submitSteer({ stop: true });
    if (target.dataset.role === "override-submit") void submitOverrides();
    if (target.dataset.role === "export-recipe") void exportRecipe();
  });
  document.body.addEventListener("input", (ev) => {
    const target = ev.target as HTMLInputElement;
    if (target.dataset.role === "k-slider") {
      state = selectIteration(state, Number(target.value));
      void refreshFront();
    }
    if (target.dataset.role === "rho") {
      state.steering.rho = target.value === "" ? null : Number(target.value);
      render();
    }
    if (target.dataset.role === "sigma") {
      state.steering.sigma = target.value === "" ? null : Number(target.value);
      render();
    }
    if (target.dataset.role === "feature") void updateOverrideDraft();
    if (target.dataset.role === "axis-x") {
      state.sliceAxisX = target.value || null;
      void renderSlice();
    }
    if (target.dataset.role === "axis-y") {
      state.sliceAxisY = target.value || null;
      void renderSlice();
    }
  });
}

async function refreshFront() {
  if (!state.runId) return;
  front = await api.getFront(state.runId, effectiveK(state));
  render();
}

async function submitSteer(flags: { pause?: boolean; resume?: boolean; stop?: boolean }) {
  if (!state.runId) return;
  const event: Record<string, unknown> = { ...flags };
  if (!flags.pause && !flags.resume && !flags.stop) {
    if (state.steering.rho !== null) event.rho = state.steering.rho;
    if (state.steering.sigma !== null) event.sigma = state.steering.sigma;
  }
  const ack = await api.steer(state.runId, event);
  lastAck = { appliesFromK: ack.applies_from_k, event };
  state.steering = { rho: null, sigma: null };
  render();
}

async function updateOverrideDraft() {
  if (!curve) return;
  const checked = Array.from(
    document.querySelectorAll<HTMLInputElement>('[data-role="feature"]:checked'),
  ).map((box) => box.dataset.feature!);
  const { add, remove } = overridesFromChecks(curve.curve.chosen_features, checked);
  state.overridesAdd = add;
  state.overridesRemove = remove;
  render();
}

async function submitOverrides() {
  if (!state.runId) return;
  await api.postOverrides(state.runId, state.overridesAdd, state.overridesRemove);
  state.overridesAdd = [];
  state.overridesRemove = [];
  await refreshAll();
}

async function exportRecipe() {
  if (!state.runId || state.selectedPoint === null) return;
  const { recipes } = await api.getRecipes(state.runId);
  const match = recipes.findIndex(
    (r) => (r.provenance as { archive_index?: number }).archive_index === state.selectedPoint,
  );
  const doc = match >= 0 ? await api.exportRecipe(state.runId, match) : recipes[0];
  const blob = new Blob([JSON.stringify(doc, null, 2)], { type: "application/json" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `recipe-${state.runId}-${state.selectedPoint}.json`;
  link.click();
}

wireEvents();
void refreshRunList();
setInterval(() => {
  if (!polling) void refreshRunList();
}, 5000);
