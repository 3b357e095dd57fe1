/** Bootstrap: wires the viewer, selection tools, inversion polling and the
 * edit panel to the service API. */

import { ApiClient, ApiError } from "./api";
import {
  AppState,
  canApplyEdit,
  canUndo,
  clearSelection,
  editApplied,
  editUndone,
  initialState,
  withBanner,
  withBusy,
  withCloud,
  withColorMode,
  withProgress,
  withSelection,
  withSession,
  withTool,
  withVisible,
  type Overlay,
} from "./state";
import { pickBrush, pickInRect } from "./picking";
import { readEditRecord, syncPanel, type PanelElements } from "./panel";
import { Viewer } from "./viewer";

const api = new ApiClient("");
let state: AppState = initialState();
let donor: number[][] | null = null;

const canvas = document.getElementById("viewport") as HTMLCanvasElement;
const viewer = new Viewer(canvas);

const el = {
  file: document.getElementById("file") as HTMLInputElement,
  invert: document.getElementById("invert") as HTMLButtonElement,
  invertMode: document.getElementById("invert-mode") as HTMLSelectElement,
  iterations: document.getElementById("iterations") as HTMLInputElement,
  status: document.getElementById("status") as HTMLElement,
  banner: document.getElementById("banner") as HTMLElement,
  colorMode: document.getElementById("color-mode") as HTMLSelectElement,
  tool: document.getElementById("tool") as HTMLSelectElement,
  clear: document.getElementById("clear-selection") as HTMLButtonElement,
  selectionInfo: document.getElementById("selection-info") as HTMLElement,
  overlays: {
    target: document.getElementById("show-target") as HTMLInputElement,
    recon: document.getElementById("show-recon") as HTMLInputElement,
    edited: document.getElementById("show-edited") as HTMLInputElement,
  },
  panel: {
    mode: document.getElementById("edit-mode") as HTMLSelectElement,
    sigma: document.getElementById("sigma") as HTMLInputElement,
    sigmaValue: document.getElementById("sigma-value") as HTMLElement,
    weight: document.getElementById("weight") as HTMLInputElement,
    weightValue: document.getElementById("weight-value") as HTMLElement,
    scaleX: document.getElementById("scale-x") as HTMLInputElement,
    scaleY: document.getElementById("scale-y") as HTMLInputElement,
    scaleZ: document.getElementById("scale-z") as HTMLInputElement,
    apply: document.getElementById("apply") as HTMLButtonElement,
    undo: document.getElementById("undo") as HTMLButtonElement,
  } satisfies PanelElements,
  donorFile: document.getElementById("donor-file") as HTMLInputElement,
};

function setState(next: AppState): void {
  state = next;
  render();
}

function render(): void {
  el.status.textContent =
    state.inversion.state === "running"
      ? `inverting: iteration ${state.inversion.iteration ?? 0}` +
        (state.inversion.cd != null ? `, CD ${state.inversion.cd.toExponential(3)}` : "")
      : state.inversion.state === "done"
        ? `done, CD ${(state.inversion.cd ?? 0).toExponential(3)}`
        : state.inversion.state;
  el.banner.hidden = state.banner === null;
  el.banner.textContent = state.banner ?? "";
  el.selectionInfo.textContent = `${state.selection.length} points selected`;
  for (const which of ["target", "recon", "edited"] as Overlay[]) {
    viewer.setVisible(which, state.visible[which]);
  }
  viewer.setSelection(state.selection);
  syncPanel(el.panel, canApplyEdit(state), canUndo(state));
  el.invert.disabled = state.sessionId === null || state.busy ||
    state.inversion.state === "running" || state.inversion.state === "pending";
}

function showError(error: unknown): void {
  const message = error instanceof ApiError ? error.message : String(error);
  setState(withBanner(state, message));
}

el.banner.addEventListener("click", () => setState(withBanner(state, null)));

el.file.addEventListener("change", async () => {
  const file = el.file.files?.[0];
  if (!file) return;
  try {
    setState(withBusy(state, true));
    const bytes = await file.arrayBuffer();
    const sessionId = await api.createSession(bytes);
    const target = await api.getCloud(sessionId, "target");
    setState(withBusy(withSession(state, sessionId, target), false));
    viewer.setCloud("target", target);
    viewer.setCloud("recon", undefined);
    viewer.setCloud("edited", undefined);
  } catch (error) {
    setState(withBusy(state, false));
    showError(error);
  }
});

el.donorFile.addEventListener("change", async () => {
  const file = el.donorFile.files?.[0];
  if (!file) return;
  const text = await file.text();
  donor = text
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0)
    .map((line) => line.split(/\s+/).map(Number));
});

el.invert.addEventListener("click", async () => {
  if (!state.sessionId) return;
  try {
    const options: Record<string, unknown> = { mode: el.invertMode.value };
    if (el.iterations.value) options.step3_iterations = Number(el.iterations.value);
    await api.startInversion(state.sessionId, options);
    const status = await api.pollUntilDone(state.sessionId, {
      intervalMs: 700,
      onProgress: (s) => setState(withProgress(state, s)),
    });
    setState(withProgress(state, status));
    const recon = await api.getCloud(state.sessionId, "recon");
    const edited = await api.getCloud(state.sessionId, "edited");
    setState(withCloud(withCloud(state, "recon", recon), "edited", edited));
    viewer.setCloud("recon", recon);
    viewer.setCloud("edited", edited);
  } catch (error) {
    showError(error);
  }
});

el.colorMode.addEventListener("change", () => {
  const mode = el.colorMode.value === "solid" ? "solid" : "correspondence";
  setState(withColorMode(state, mode));
  viewer.setColorMode(mode);
});

el.tool.addEventListener("change", () => {
  setState(withTool(state, el.tool.value === "brush" ? "brush" : "box"));
});

el.clear.addEventListener("click", () => setState(clearSelection(state)));

for (const which of ["target", "recon", "edited"] as Overlay[]) {
  el.overlays[which].addEventListener("change", () => {
    setState(withVisible(state, which, el.overlays[which].checked));
  });
}

// --- selection: drag a box or sweep a brush over the reconstruction --------

let dragStart: { x: number; y: number } | null = null;

function canvasPoint(event: MouseEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return { x: event.clientX - rect.left, y: event.clientY - rect.top };
}

canvas.addEventListener("mousedown", (event) => {
  if (!event.shiftKey) return; // plain drag orbits the camera
  dragStart = canvasPoint(event);
  event.stopPropagation();
});

canvas.addEventListener("mouseup", (event) => {
  if (!dragStart) return;
  const end = canvasPoint(event);
  const screen = viewer.screenPoints(state.stackDepth > 0 ? "edited" : "recon");
  if (screen) {
    let picked: number[];
    if (state.tool === "box") {
      picked = pickInRect(screen, {
        x0: dragStart.x,
        y0: dragStart.y,
        x1: end.x,
        y1: end.y,
      });
    } else {
      const radius = Math.max(
        12,
        Math.hypot(end.x - dragStart.x, end.y - dragStart.y),
      );
      picked = pickBrush(screen, end.x, end.y, radius);
    }
    setState(picked.length > 0 ? withSelection(state, picked) : clearSelection(state));
  }
  dragStart = null;
});

el.panel.mode.addEventListener("change", render);
el.panel.sigma.addEventListener("input", render);
el.panel.weight.addEventListener("input", render);

el.panel.apply.addEventListener("click", async () => {
  if (!state.sessionId || !canApplyEdit(state)) return;
  const record = readEditRecord(el.panel, state.selection, donor);
  if (typeof record === "string") {
    setState(withBanner(state, record));
    return;
  }
  try {
    setState(withBusy(state, true));
    const response = await api.pushEdit(state.sessionId, record);
    setState(withBusy(editApplied(state, response, response.stack_depth), false));
    viewer.setCloud("edited", response);
  } catch (error) {
    setState(withBusy(state, false));
    showError(error); // prior state left intact
  }
});

el.panel.undo.addEventListener("click", async () => {
  if (!state.sessionId || !canUndo(state)) return;
  try {
    setState(withBusy(state, true));
    const response = await api.undoEdit(state.sessionId);
    setState(withBusy(editUndone(state, response, response.stack_depth), false));
    viewer.setCloud("edited", response);
  } catch (error) {
    setState(withBusy(state, false));
    showError(error);
  }
});

function resize(): void {
  viewer.resize(canvas.clientWidth, canvas.clientHeight);
}
window.addEventListener("resize", resize);
resize();
render();
