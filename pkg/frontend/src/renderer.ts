/**
 * Canvas renderer for the streamed frames.
 *
 * Draw order is edges, then points, then landmarks, so landmarks always sit
 * on top and edges stay translucent background. Point clouds beyond the
 * sprite budget are decimated to a fixed pseudo-random subsample (stable for
 * a given n, so the picture does not flicker between frames). Before the
 * first frame arrives only the clear happens: a blank canvas.
 */

import { colorOf } from "./colormap.js";
import type { ViewState } from "./view.js";

type PaintStyle = string | CanvasGradient | CanvasPattern;

/** The subset of CanvasRenderingContext2D the renderer needs (stub-able in tests). */
export interface Draw2D {
  fillStyle: PaintStyle;
  strokeStyle: PaintStyle;
  globalAlpha: number;
  lineWidth: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

export interface RenderOptions {
  pointSize: number;
  landmarkRadius: number;
  maxSprites: number;
}

export const DEFAULT_RENDER_OPTIONS: RenderOptions = {
  pointSize: 2,
  landmarkRadius: 6,
  maxSprites: 2_000_000,
};

/** Deterministic subsample indices for point clouds beyond the budget. */
export function decimationIndices(n: number, budget: number): Uint32Array | null {
  if (n <= budget) return null;
  const out = new Uint32Array(budget);
  let state = 0x9e3779b9 ^ n;
  for (let i = 0; i < budget; i++) {
    // xorshift32; fixed seed per n keeps the subsample stable across frames
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    out[i] = state % n;
  }
  return out;
}

export class Renderer {
  private cachedDecimation: { n: number; idx: Uint32Array | null } | null = null;

  constructor(readonly options: RenderOptions = DEFAULT_RENDER_OPTIONS) {}

  render(view: ViewState, g: Draw2D, width: number, height: number): void {
    g.clearRect(0, 0, width, height);
    const pts = view.points;
    if (!pts) return; // nothing received yet: blank canvas

    this.drawEdges(view, g, width, height);
    this.drawPoints(view, g, width, height, pts.positions, pts.colors);
    this.drawLandmarks(view, g, width, height);
  }

  private drawEdges(view: ViewState, g: Draw2D, width: number, height: number): void {
    const lm = view.landmarks;
    if (!lm || lm.edges.length === 0) return;
    g.globalAlpha = 0.35;
    g.strokeStyle = "rgb(128,128,128)";
    g.lineWidth = 1;
    g.beginPath();
    for (let e = 0; e < lm.edges.length; e += 2) {
      const [ax, ay] = this.landmarkScreenPos(view, lm.edges[e], width, height);
      const [bx, by] = this.landmarkScreenPos(view, lm.edges[e + 1], width, height);
      g.moveTo(ax, ay);
      g.lineTo(bx, by);
    }
    g.stroke();
    g.globalAlpha = 1;
  }

  private drawPoints(
    view: ViewState,
    g: Draw2D,
    width: number,
    height: number,
    positions: Float32Array,
    colors: Uint8Array,
  ): void {
    const n = colors.length;
    if (this.cachedDecimation?.n !== n) {
      this.cachedDecimation = { n, idx: decimationIndices(n, this.options.maxSprites) };
    }
    const idx = this.cachedDecimation.idx;
    const size = this.options.pointSize;
    const half = size / 2;
    const count = idx ? idx.length : n;
    for (let t = 0; t < count; t++) {
      const i = idx ? idx[t] : t;
      const [sx, sy] = view.worldToScreen(positions[2 * i], positions[2 * i + 1], width, height);
      g.fillStyle = colorOf(colors[i]);
      g.fillRect(sx - half, sy - half, size, size);
    }
  }

  private drawLandmarks(view: ViewState, g: Draw2D, width: number, height: number): void {
    const lm = view.landmarks;
    if (!lm) return;
    const count = lm.lo.length / 2;
    for (let r = 0; r < count; r++) {
      const [sx, sy] = this.landmarkScreenPos(view, r, width, height);
      g.beginPath();
      g.arc(sx, sy, this.options.landmarkRadius, 0, 2 * Math.PI);
      g.fillStyle = r === view.selectedLandmark ? "rgba(255,120,40,0.9)" : "rgba(30,30,30,0.75)";
      g.fill();
      g.strokeStyle = "rgb(255,255,255)";
      g.lineWidth = 1.5;
      g.stroke();
    }
  }

  /** Screen position of a landmark row, honoring an active drag override. */
  landmarkScreenPos(view: ViewState, row: number, width: number, height: number): [number, number] {
    const lm = view.landmarks!;
    let x = lm.lo[2 * row];
    let y = lm.lo[2 * row + 1];
    if (view.drag && view.drag.landmark === row) {
      x = view.drag.x;
      y = view.drag.y;
    }
    return view.worldToScreen(x, y, width, height);
  }

  /** Landmark row under a screen position, or null. */
  hitTestLandmark(view: ViewState, sx: number, sy: number, width: number, height: number): number | null {
    const lm = view.landmarks;
    if (!lm) return null;
    const r2 = (this.options.landmarkRadius + 2) ** 2;
    let best: number | null = null;
    let bestD = Infinity;
    for (let row = 0; row < lm.lo.length / 2; row++) {
      const [lx, ly] = this.landmarkScreenPos(view, row, width, height);
      const d = (lx - sx) ** 2 + (ly - sy) ** 2;
      if (d <= r2 && d < bestD) {
        best = row;
        bestD = d;
      }
    }
    return best;
  }
}
