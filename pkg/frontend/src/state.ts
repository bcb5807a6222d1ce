import type { MetricName } from "./types.js";

export interface ViewState {
  gridId: string | null;
  jobId: string | null;
  gridSize: number;
  axes: [MetricName, MetricName];
  viewport: { x: [number, number]; y: [number, number] } | null;
  constraints: Record<string, Array<number | boolean>>;
  selectedCandidates: number[]; // current lasso/scatter selection
  candidatePair: [number, number] | null; // individual-mode comparison
  groupPair: [number[], number[]] | null; // group-mode comparison
  sessionId: string | null;
  currentStageId: number | null;
}

export function initialState(): ViewState {
  return {
    gridId: null,
    jobId: null,
    gridSize: 0,
    axes: ["n", "hr"],
    viewport: null,
    constraints: {},
    selectedCandidates: [],
    candidatePair: null,
    groupPair: null,
    sessionId: null,
    currentStageId: null,
  };
}

export class StateError extends Error {}

function assertLiveIds(state: ViewState, ids: number[]): void {
  const bad = ids.filter((id) => id < 0 || id >= state.gridSize);
  if (bad.length) {
    throw new StateError(`candidate ids outside the grid: ${bad.join(", ")}`);
  }
}

export function setGrid(state: ViewState, gridId: string, gridSize: number): ViewState {
  // a new grid invalidates every id-based selection
  return {
    ...state,
    gridId,
    gridSize,
    viewport: null,
    constraints: {},
    selectedCandidates: [],
    candidatePair: null,
    groupPair: null,
  };
}

export function setAxes(state: ViewState, x: MetricName, y: MetricName): ViewState {
  if (x === y) throw new StateError("scatter axes must be distinct");
  return { ...state, axes: [x, y], viewport: null };
}

export function setConstraint(
  state: ViewState,
  name: string,
  values: Array<number | boolean>,
): ViewState {
  return { ...state, constraints: { ...state.constraints, [name]: values } };
}

export function clearConstraint(state: ViewState, name: string): ViewState {
  const constraints = { ...state.constraints };
  delete constraints[name];
  return { ...state, constraints };
}

export function selectCandidates(state: ViewState, ids: number[]): ViewState {
  assertLiveIds(state, ids);
  return { ...state, selectedCandidates: [...ids].sort((a, b) => a - b) };
}

export function selectCandidatePair(state: ViewState, a: number, b: number): ViewState {
  assertLiveIds(state, [a, b]);
  return { ...state, candidatePair: [a, b] };
}

export function selectGroupPair(
  state: ViewState,
  groupA: number[],
  groupB: number[],
): ViewState {
  assertLiveIds(state, [...groupA, ...groupB]);
  if (!groupA.length || !groupB.length) {
    throw new StateError("both comparison groups must be nonempty");
  }
  return { ...state, groupPair: [groupA, groupB] };
}

export function setViewport(
  state: ViewState,
  x: [number, number],
  y: [number, number],
): ViewState {
  return { ...state, viewport: { x, y } };
}

export function setStage(state: ViewState, stageId: number | null): ViewState {
  return { ...state, currentStageId: stageId };
}
