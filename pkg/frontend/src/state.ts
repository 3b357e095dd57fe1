/** UI state as a pure value; every event produces a new state object so the
 * view is always a function of (session history, last server responses). */

import type { CloudPayload, SessionStatus } from "./api";

export type Overlay = "target" | "recon" | "edited";
export type ColorMode = "solid" | "correspondence";
export type SelectTool = "box" | "brush";

export interface AppState {
  sessionId: string | null;
  clouds: Partial<Record<Overlay, CloudPayload>>;
  visible: Record<Overlay, boolean>;
  colorMode: ColorMode;
  tool: SelectTool;
  selection: number[];
  stackDepth: number;
  inversion: { state: string; iteration: number | null; cd: number | null };
  busy: boolean;
  banner: string | null;
}

export function initialState(): AppState {
  return {
    sessionId: null,
    clouds: {},
    visible: { target: true, recon: true, edited: true },
    colorMode: "correspondence",
    tool: "box",
    selection: [],
    stackDepth: 0,
    inversion: { state: "idle", iteration: null, cd: null },
    busy: false,
    banner: null,
  };
}

export function withSession(state: AppState, sessionId: string, target: CloudPayload): AppState {
  return {
    ...initialState(),
    sessionId,
    clouds: { target },
    colorMode: state.colorMode,
    tool: state.tool,
  };
}

export function withCloud(state: AppState, which: Overlay, cloud: CloudPayload): AppState {
  return { ...state, clouds: { ...state.clouds, [which]: cloud } };
}

export function withProgress(state: AppState, status: SessionStatus): AppState {
  return {
    ...state,
    inversion: {
      state: status.state,
      iteration: status.iteration ?? null,
      cd: status.cd ?? status.final_cd ?? null,
    },
  };
}

export function withSelection(state: AppState, indices: number[]): AppState {
  const unique = [...new Set(indices)].sort((a, b) => a - b);
  return { ...state, selection: unique };
}

export function clearSelection(state: AppState): AppState {
  return { ...state, selection: [] };
}

export function withVisible(state: AppState, which: Overlay, visible: boolean): AppState {
  return { ...state, visible: { ...state.visible, [which]: visible } };
}

export function withColorMode(state: AppState, mode: ColorMode): AppState {
  return { ...state, colorMode: mode };
}

export function withTool(state: AppState, tool: SelectTool): AppState {
  return { ...state, tool };
}

export function withBanner(state: AppState, banner: string | null): AppState {
  return { ...state, banner };
}

export function withBusy(state: AppState, busy: boolean): AppState {
  return { ...state, busy };
}

/** Server confirmed an edit: swap in the returned cloud and depth. */
export function editApplied(state: AppState, cloud: CloudPayload, depth: number): AppState {
  return {
    ...withCloud(state, "edited", cloud),
    stackDepth: depth,
    banner: null,
  };
}

/** Server confirmed an undo: restore the returned cloud and depth. */
export function editUndone(state: AppState, cloud: CloudPayload, depth: number): AppState {
  return {
    ...withCloud(state, "edited", cloud),
    stackDepth: depth,
    banner: null,
  };
}

export function canApplyEdit(state: AppState): boolean {
  return (
    state.sessionId !== null &&
    state.inversion.state === "done" &&
    state.selection.length > 0 &&
    !state.busy
  );
}

export function canUndo(state: AppState): boolean {
  return state.stackDepth > 0 && !state.busy;
}
