// Dashboard view state: which run / iteration / front point is selected,
// plus the steering and override drafts. The state never caches API numbers
// beyond the latest payloads; truth stays server-side.

export interface SteeringDraft {
  rho: number | null;
  sigma: number | null;
}

export interface ViewState {
  runId: string | null;
  selectedK: number | null; // null = follow latest
  latestK: number;
  selectedPoint: number | null;
  sliceAxisX: string | null;
  sliceAxisY: string | null;
  sliceBase: string | null; // comma-joined native values
  steering: SteeringDraft;
  overridesAdd: string[];
  overridesRemove: string[];
  status: string;
}

export function initialState(): ViewState {
  return {
    runId: null,
    selectedK: null,
    latestK: 0,
    selectedPoint: null,
    sliceAxisX: null,
    sliceAxisY: null,
    sliceBase: null,
    steering: { rho: null, sigma: null },
    overridesAdd: [],
    overridesRemove: [],
    status: "created",
  };
}

export function effectiveK(state: ViewState): number | undefined {
  if (state.selectedK === null) {
    return undefined; // latest
  }
  // the slider can never run ahead of the log
  return Math.min(state.selectedK, state.latestK);
}

export function selectIteration(state: ViewState, k: number): ViewState {
  return { ...state, selectedK: Math.max(1, Math.min(k, state.latestK)), selectedPoint: null };
}

export interface DraftValidation {
  ok: boolean;
  problems: string[];
}

export function validateSteering(draft: SteeringDraft): DraftValidation {
  const problems: string[] = [];
  if (draft.rho !== null && (isNaN(draft.rho) || draft.rho < 0 || draft.rho > 1)) {
    problems.push("rho must be within [0, 1]");
  }
  if (draft.sigma !== null && (isNaN(draft.sigma) || draft.sigma <= 0)) {
    problems.push("sigma must be > 0");
  }
  if (draft.rho === null && draft.sigma === null) {
    problems.push("nothing to submit");
  }
  return { ok: problems.length === 0, problems };
}

export function validateSliceAxes(x: string | null, y: string | null): DraftValidation {
  const problems: string[] = [];
  if (!x) {
    problems.push("pick an x axis");
  }
  if (x && y && x === y) {
    problems.push("x and y axes must differ");
  }
  return { ok: problems.length === 0, problems };
}
