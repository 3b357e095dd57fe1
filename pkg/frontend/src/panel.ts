/** Edit panel: mode picker with per-mode controls, apply and undo. The
 * panel only assembles the edit record; geometry stays server-side. */

import type { EditRecord } from "./api";

export type PanelElements = {
  mode: HTMLSelectElement;
  sigma: HTMLInputElement;
  sigmaValue: HTMLElement;
  weight: HTMLInputElement;
  weightValue: HTMLElement;
  scaleX: HTMLInputElement;
  scaleY: HTMLInputElement;
  scaleZ: HTMLInputElement;
  apply: HTMLButtonElement;
  undo: HTMLButtonElement;
};

export function readEditRecord(
  elements: PanelElements,
  selection: number[],
  donor: number[][] | null,
): EditRecord | string {
  if (selection.length === 0) return "select a region first";
  const mode = elements.mode.value;
  if (mode === "additive_noise") {
    return {
      mode: "additive_noise",
      indices: selection,
      sigma: Number(elements.sigma.value),
    };
  }
  if (mode === "interpolate_toward") {
    if (!donor) return "load a donor shape first";
    return {
      mode: "interpolate_toward",
      indices: selection,
      weight: Number(elements.weight.value),
      donor,
    };
  }
  const sx = Number(elements.scaleX.value);
  const sy = Number(elements.scaleY.value);
  const sz = Number(elements.scaleZ.value);
  return {
    mode: "affine_transform",
    indices: selection,
    linear: [
      [sx, 0, 0],
      [0, sy, 0],
      [0, 0, sz],
    ],
    translation: [0, 0, 0],
  };
}

export function syncPanel(elements: PanelElements, canApply: boolean, canUndo: boolean): void {
  const mode = elements.mode.value;
  elements.sigma.parentElement!.hidden = mode !== "additive_noise";
  elements.weight.parentElement!.hidden = mode !== "interpolate_toward";
  elements.scaleX.parentElement!.hidden = mode !== "affine_transform";
  elements.sigmaValue.textContent = elements.sigma.value;
  elements.weightValue.textContent = elements.weight.value;
  elements.apply.disabled = !canApply;
  elements.undo.disabled = !canUndo;
}
