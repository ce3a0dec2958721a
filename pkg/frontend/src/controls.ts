/**
 * Control panel model: slider/selector state and the SetParams / landmark
 * edit messages it emits. DOM-free so the logic is testable headless; the
 * page binds widgets to these methods.
 */

import type { Message } from "./protocol.js";
import type { ViewState } from "./view.js";

export const SIGMA_RANGE: [number, number] = [0.05, 3.0];
export const ALPHA_RANGE: [number, number] = [0.0, 1.0];
export const K_CHOICES = [4, 8, 16, 32, 64];
export const MIN_LANDMARKS = 3;

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

export class ControlPanel {
  constructor(
    private readonly view: ViewState,
    private readonly send: (msg: Message) => void,
  ) {}

  setSigma(value: number): void {
    const sigma = clamp(value, SIGMA_RANGE[0], SIGMA_RANGE[1]);
    this.view.controls.sigma = sigma;
    this.send({ kind: "set_params", params: { sigma } });
  }

  setAlpha(value: number): void {
    const alpha = clamp(value, ALPHA_RANGE[0], ALPHA_RANGE[1]);
    this.view.controls.alpha = alpha;
    this.send({ kind: "set_params", params: { alpha } });
  }

  setK(value: number): void {
    if (!K_CHOICES.includes(value)) {
      throw new Error(`k must be one of ${K_CHOICES.join(", ")}`);
    }
    this.view.controls.k = value;
    this.send({ kind: "set_params", params: { k: value } });
  }

  setMode(mode: "som" | "graph"): void {
    this.view.controls.mode = mode;
    this.send({ kind: "set_params", params: { mode } });
  }

  setPaused(paused: boolean): void {
    this.view.controls.paused = paused;
    this.send({ kind: "set_params", params: { paused } });
  }

  /** Color-by dimensions offered to the dropdown, from DatasetInfo. */
  colorDimensions(): string[] {
    return this.view.datasetInfo ? this.view.datasetInfo.names : [];
  }

  setColorDim(index: number): void {
    const names = this.colorDimensions();
    if (index < 0 || (names.length > 0 && index >= names.length)) {
      throw new Error(`color dimension ${index} out of range`);
    }
    this.view.controls.colorDim = index;
    this.send({ kind: "set_params", params: { color_dim: index } });
  }

  addLandmarkAt(worldX: number, worldY: number): void {
    this.send({ kind: "add_landmark", x: worldX, y: worldY });
  }

  duplicateSelected(): boolean {
    const sel = this.view.selectedLandmark;
    if (sel === null) return false;
    this.send({ kind: "duplicate_landmark", landmark: sel });
    return true;
  }

  /** Removal is disabled when the model would fall below the projection floor. */
  canRemove(): boolean {
    const g = this.view.landmarkCount();
    return g - 1 >= Math.max(MIN_LANDMARKS, this.view.controls.k);
  }

  removeSelected(): boolean {
    const sel = this.view.selectedLandmark;
    if (sel === null || !this.canRemove()) return false;
    this.send({ kind: "remove_landmark", landmark: sel });
    this.view.selectedLandmark = null;
    return true;
  }
}
