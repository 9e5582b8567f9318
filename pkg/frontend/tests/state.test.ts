import { describe, expect, it } from "vitest";

import { effectiveK, initialState, selectIteration, validateSliceAxes, validateSteering } from "../src/state.js";

describe("view state", () => {
  it("selected iteration never exceeds the latest available k", () => {
    let state = { ...initialState(), latestK: 10 };
    state = selectIteration(state, 99);
    expect(state.selectedK).toBe(10);
    state = selectIteration(state, 0);
    expect(state.selectedK).toBe(1);
  });

  it("effectiveK follows live when nothing is selected", () => {
    const state = { ...initialState(), latestK: 7 };
    expect(effectiveK(state)).toBeUndefined();
    expect(effectiveK({ ...state, selectedK: 3 })).toBe(3);
  });

  it("selecting an iteration clears the point selection", () => {
    let state = { ...initialState(), latestK: 5, selectedPoint: 2 };
    state = selectIteration(state, 4);
    expect(state.selectedPoint).toBeNull();
  });

  it("steering draft validation", () => {
    expect(validateSteering({ rho: 0.5, sigma: null }).ok).toBe(true);
    expect(validateSteering({ rho: -0.1, sigma: null }).ok).toBe(false);
    expect(validateSteering({ rho: null, sigma: 0 }).ok).toBe(false);
    expect(validateSteering({ rho: null, sigma: null }).ok).toBe(false);
  });

  it("slice axis validation rejects identical axes", () => {
    expect(validateSliceAxes("a", "a").ok).toBe(false);
    expect(validateSliceAxes("a", "b").ok).toBe(true);
    expect(validateSliceAxes("a", null).ok).toBe(true);
  });
});
