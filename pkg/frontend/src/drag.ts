/**
 * Landmark dragging: pointer events in, coalesced MoveLandmark messages out.
 *
 * While a drag is live the landmark is pinned and at most one MoveLandmark
 * goes out per animation frame regardless of pointer event rate; release
 * flushes the final position with pinned=false. The frame scheduler is
 * injected so tests can step it manually.
 */

import type { Message } from "./protocol.js";
import type { Renderer } from "./renderer.js";
import type { ViewState } from "./view.js";

export type FrameScheduler = (flush: () => void) => void;

export class DragController {
  private pending = false;

  constructor(
    private readonly view: ViewState,
    private readonly renderer: Renderer,
    private readonly send: (msg: Message) => void,
    private readonly schedule: FrameScheduler,
  ) {}

  /** Returns true when the pointer grabbed a landmark. */
  pointerDown(sx: number, sy: number, width: number, height: number): boolean {
    const row = this.renderer.hitTestLandmark(this.view, sx, sy, width, height);
    if (row === null) return false;
    const [wx, wy] = this.view.screenToWorld(sx, sy, width, height);
    this.view.drag = { landmark: row, x: wx, y: wy };
    this.view.selectedLandmark = row;
    this.queueFlush();
    return true;
  }

  pointerMove(sx: number, sy: number, width: number, height: number): void {
    const drag = this.view.drag;
    if (!drag) return;
    const [wx, wy] = this.view.screenToWorld(sx, sy, width, height);
    drag.x = wx;
    drag.y = wy;
    this.queueFlush();
  }

  pointerUp(): void {
    const drag = this.view.drag;
    if (!drag) return;
    this.view.drag = null;
    this.pending = false; // supersede any queued pinned move
    this.send({
      kind: "move_landmark",
      landmark: drag.landmark,
      x: drag.x,
      y: drag.y,
      pinned: false,
    });
  }

  get dragging(): boolean {
    return this.view.drag !== null;
  }

  private queueFlush(): void {
    if (this.pending) return; // coalesce: one message per animation frame
    this.pending = true;
    this.schedule(() => {
      if (!this.pending) return;
      this.pending = false;
      const drag = this.view.drag;
      if (!drag) return; // released before the frame fired
      this.send({
        kind: "move_landmark",
        landmark: drag.landmark,
        x: drag.x,
        y: drag.y,
        pinned: true,
      });
    });
  }
}
