// End-to-end dashboard fidelity (acceptance criterion 12): drive a seeded
// run through the real engine API, assert the rendered views carry exactly
// the payload numbers at displayed precision, and that a steering event
// submitted while the run sits at iteration k lands in record k+1's log.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient } from "../src/api.js";
import { fmt, fmtValue } from "../src/format.js";
import { frontView, pointDetail } from "../src/views/front.js";
import { metricsView } from "../src/views/metrics.js";
import { slice1DView, slice2DView } from "../src/views/slice.js";

const PORT = 8743;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let api: ApiClient;
let runId: string;
let config: Record<string, unknown>;

function sleep(ms: number) {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitFor(pred: () => Promise<boolean>, timeoutMs: number, label: string) {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      if (await pred()) return;
    } catch {
      // not up yet
    }
    await sleep(150);
  }
  throw new Error(`timeout waiting for ${label}`);
}

beforeAll(async () => {
  const work = mkdtempSync(join(tmpdir(), "doeopt-e2e-"));
  const dataDir = join(work, "demo");
  execFileSync("python3", ["-m", "doeopt.cli", "fixture", "--out", dataDir]);
  const cfgJson = execFileSync(
    "python3",
    [
      "-c",
      `import json; from doeopt.fixtures import fixture_config_dict; ` +
        `print(json.dumps(fixture_config_dict(${JSON.stringify(dataDir)}, iterations=120, population=16)))`,
    ],
    { encoding: "utf-8" },
  );
  config = JSON.parse(cfgJson);

  server = spawn("python3", ["-m", "doeopt.cli", "serve", "--store", join(work, "store"), "--port", String(PORT)], {
    stdio: "ignore",
  });
  api = new ApiClient(BASE);
  await waitFor(async () => (await api.listRuns()).runs.length === 0, 30000, "server startup");

  const created = await api.createRun(config);
  runId = created.run_id;
  await waitFor(async () => (await api.getRun(runId)).latest_k >= 2, 60000, "first iterations");
}, 120000);

afterAll(() => {
  server?.kill();
});

describe("dashboard end-to-end", () => {
  it("steering submitted at iteration k appears in record k+1's event log", async () => {
    // freeze the engine at an iteration boundary so "current k" is exact:
    // `parked` flips once the optimizer thread actually sits at the boundary
    await api.steer(runId, { pause: true });
    await waitFor(
      async () => Boolean((await api.getRun(runId)).parked),
      60000,
      "engine parked at boundary",
    );
    const k = (await api.getRun(runId)).latest_k;
    const ack = await api.steer(runId, { rho: 0.85 });
    expect(ack.accepted).toBe(true);
    expect(ack.applies_from_k).toBe(k + 1);
    await api.steer(runId, { resume: true });

    await waitFor(async () => (await api.getRun(runId)).latest_k >= k + 1, 60000, "next iteration");
    const { records } = await api.getIterations(runId, k);
    const next = records.find((r) => r.k === k + 1);
    expect(next, `record ${k + 1} exists`).toBeDefined();
    const steered = next!.steering.some((ev) => (ev as { rho?: number }).rho === 0.85);
    expect(steered, `rho event in record ${k + 1} log: ${JSON.stringify(next!.steering)}`).toBe(true);
    expect(next!.rho).toBe(0.85);
  }, 120000);

  it("run completes", async () => {
    await waitFor(async () => (await api.getRun(runId)).status === "done", 120000, "run done");
    const info = await api.getRun(runId);
    expect(info.status).toBe("done");
  }, 130000);

  it("front_view renders exactly the API payload values", async () => {
    const payload = await api.getFront(runId);
    const html = frontView(payload, payload.points[0].index);
    const [o1, o2] = payload.outputs;
    for (const p of payload.points) {
      expect(html).toContain(`${o1}=${fmt(p.y[o1])}, ${o2}=${fmt(p.y[o2])}`);
    }
    expect(html.match(/class="candidate"/g) ?? []).toHaveLength(payload.candidates.length);

    const detail = pointDetail(payload, payload.points[0].index, null);
    for (const [name, v] of Object.entries(payload.points[0].x)) {
      expect(detail).toContain(`<td>${name}</td><td>${fmtValue(v)}</td>`);
    }
    for (const name of payload.outputs) {
      expect(detail).toContain(fmt(payload.points[0].y[name]));
    }
  });

  it("metrics_view renders the full series at displayed precision", async () => {
    const payload = await api.getMetrics(runId);
    const html = metricsView(payload);
    for (const entry of payload.series) {
      if (entry.hypervolume !== null) {
        expect(html).toContain(`k=${entry.k}: ${fmt(entry.hypervolume)}`);
      }
      if (entry.k >= 2 && entry.wasserstein_to_previous !== null) {
        expect(html).toContain(`k=${entry.k}: ${fmt(entry.wasserstein_to_previous)}`);
      }
    }
    // first iteration has no drift: the wasserstein chart must not plot k=1
    const wdChart = html.split('data-metric="wasserstein drift"')[1];
    expect(wdChart).not.toContain('data-k="1"');
  });

  it("slice_explorer renders exactly the API payload values (1D and 2D)", async () => {
    const features = (await api.getCurve(runId)).curve.final_features;
    const axisX = features[0];
    const axisY = features[1];

    const oneD = await api.getSlice1D(runId, axisX, 7);
    for (const output of Object.keys(oneD.points[0].predicted)) {
      const html = slice1DView(oneD, output);
      for (const p of oneD.points) {
        expect(html).toContain(
          `${axisX}=${fmt(p.value as number)}: ${fmt(p.predicted[output])} ± ${fmt(p.band[output])}`,
        );
      }
    }

    const twoD = await api.getSlice2D(runId, axisX, axisY, 4);
    for (const output of Object.keys(twoD.cells[0].predicted)) {
      const html = slice2DView(twoD, output);
      expect(html.match(/<g class="cell"/g)).toHaveLength(16);
      for (const cell of twoD.cells) {
        expect(html).toContain(
          `${axisX}=${fmt(cell.x)}, ${axisY}=${fmt(cell.y)}: ${fmt(cell.predicted[output])}`,
        );
      }
    }
  });

  it("recipe export round-trips through the API", async () => {
    const { recipes } = await api.getRecipes(runId);
    expect(recipes).toHaveLength(10);
    const flat = await api.exportRecipe(runId, 0);
    expect(flat.valid).toBe(true);
    for (const [name, v] of Object.entries(recipes[0].values)) {
      expect(flat[name]).toBe(v);
    }
  });
});
