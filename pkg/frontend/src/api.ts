// Typed client for the engine's /api/v1 surface. Every number the dashboard
// shows originates from one of these payloads; the views never compute
// domain values themselves.

export interface RunSummary {
  run_id: string;
  status: string;
  error: string | null;
  latest_k: number;
  parked?: boolean;
}

export interface FrontPoint {
  index: number;
  x: Record<string, number | string>;
  y: Record<string, number>;
}

export interface FrontPayload {
  k: number;
  points: FrontPoint[];
  candidates: { y: Record<string, number> }[];
  directions: string[];
  outputs: string[];
}

export interface MetricsEntry {
  k: number;
  hypervolume: number | null;
  hypervolume_failed: string | null;
  spacing: number | null;
  wasserstein_to_previous: number | null;
  rho: number;
  sigma: number;
  convergence_diagnostic: number | null;
  front_size: number;
}

export interface MetricsPayload {
  series: MetricsEntry[];
}

export interface CurvePoint {
  k: number;
  features: string[];
  rmse_train: number | null;
  rmse_test: number | null;
  adjusted_r2_test: number | null;
  failed: boolean;
}

export interface CurvePayload {
  curve: {
    points: CurvePoint[];
    chosen_k: number;
    chosen_features: string[];
    added: string[];
    removed: string[];
    final_features: string[];
  };
  ranking?: {
    entries: { name: string; score: number; per_output: Record<string, number> }[];
  };
}

export interface SlicePoint {
  value: number | string;
  predicted: Record<string, number>;
  band: Record<string, number>;
}

export interface Slice1DPayload {
  axis: string;
  base: Record<string, number | string>;
  points: SlicePoint[];
}

export interface SliceCell {
  x: number;
  y: number;
  predicted: Record<string, number>;
  band: Record<string, number>;
  occupied: boolean;
}

export interface Slice2DPayload {
  axes: { x: string; y: string };
  resolution: number;
  x_values: number[];
  y_values: number[];
  base: Record<string, number | string>;
  cells: SliceCell[];
}

export interface IterationRecord {
  k: number;
  front_x: number[][];
  front_y: number[][];
  hypervolume: number | null;
  spacing: number | null;
  wasserstein_to_previous: number | null;
  rho: number;
  sigma: number;
  convergence_diagnostic: number;
  steering: Record<string, unknown>[];
}

export interface IterationsPayload {
  records: IterationRecord[];
  latest_k: number;
  status: string;
}

export interface RecipePayload {
  values: Record<string, number | string>;
  flags: Record<string, string>;
  predicted: Record<string, number>;
  bands: Record<string, number>;
  provenance: Record<string, unknown>;
  constraint_report: { rule: string; ok: boolean }[];
  valid: boolean;
}

export class ApiClient {
  constructor(private baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1${path}`);
    if (!resp.ok) {
      const body = await resp.text();
      throw new Error(`GET ${path} -> ${resp.status}: ${body}`);
    }
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      const text = await resp.text();
      throw new Error(`POST ${path} -> ${resp.status}: ${text}`);
    }
    return (await resp.json()) as T;
  }

  listRuns() {
    return this.get<{ runs: RunSummary[] }>("/runs");
  }
  getRun(id: string) {
    return this.get<RunSummary & Record<string, unknown>>(`/runs/${id}`);
  }
  createRun(config: unknown) {
    return this.post<{ run_id: string }>("/runs", { config });
  }
  getFront(id: string, k?: number) {
    return this.get<FrontPayload>(`/runs/${id}/front${k !== undefined ? `?k=${k}` : ""}`);
  }
  getMetrics(id: string) {
    return this.get<MetricsPayload>(`/runs/${id}/metrics`);
  }
  getCurve(id: string) {
    return this.get<CurvePayload>(`/runs/${id}/curve`);
  }
  getIterations(id: string, after: number, wait = 0) {
    return this.get<IterationsPayload>(`/runs/${id}/iterations?after=${after}&wait=${wait}`);
  }
  getSlice1D(id: string, axis: string, resolution: number, base?: string) {
    const baseQ = base ? `&base=${encodeURIComponent(base)}` : "";
    return this.get<Slice1DPayload>(`/runs/${id}/slice?x=${axis}&resolution=${resolution}${baseQ}`);
  }
  getSlice2D(id: string, x: string, y: string, resolution: number, base?: string) {
    const baseQ = base ? `&base=${encodeURIComponent(base)}` : "";
    return this.get<Slice2DPayload>(`/runs/${id}/slice?x=${x}&y=${y}&resolution=${resolution}${baseQ}`);
  }
  getRecipes(id: string) {
    return this.get<{ recipes: RecipePayload[] }>(`/runs/${id}/recipes`);
  }
  exportRecipe(id: string, n: number) {
    return this.get<Record<string, unknown>>(`/runs/${id}/recipes/${n}/export`);
  }
  steer(id: string, event: { rho?: number; sigma?: number; pause?: boolean; resume?: boolean; stop?: boolean }) {
    return this.post<{ accepted: boolean; applies_from_k: number }>(`/runs/${id}/steer`, event);
  }
  postOverrides(id: string, add: string[], remove: string[]) {
    return this.post<{ accepted: boolean }>(`/runs/${id}/overrides`, { add, remove });
  }
}
