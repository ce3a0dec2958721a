/**
 * Client-side view state: the latest frames, the camera, drag status, and
 * the control values mirrored from SetParams.
 *
 * Message intake just replaces the latest-frame slots, so rendering never
 * blocks it and the newest frame always supersedes older undrawn ones. The
 * only position the client ever overrides locally is the actively dragged
 * landmark; everything else comes verbatim from the server.
 */

import type { DatasetInfo, FrameLandmarks, FramePoints, Message, ServerHello } from "./protocol.js";

export interface Camera {
  centerX: number;
  centerY: number;
  scale: number; // screen pixels per world unit
}

export interface DragStatus {
  landmark: number; // row index in the latest FrameLandmarks
  x: number;
  y: number;
}

export interface Toast {
  code: string;
  detail: string;
  at: number;
}

export interface ControlValues {
  sigma: number;
  alpha: number;
  k: number;
  mode: "som" | "graph";
  colorDim: number;
  paused: boolean;
}

export class ViewState {
  hello: ServerHello | null = null;
  datasetInfo: DatasetInfo | null = null;
  points: FramePoints | null = null;
  landmarks: FrameLandmarks | null = null;
  drag: DragStatus | null = null;
  toasts: Toast[] = [];
  camera: Camera = { centerX: 0, centerY: 0, scale: 50 };
  controls: ControlValues = {
    sigma: 1.0,
    alpha: 0.1,
    k: 16,
    mode: "som",
    colorDim: 0,
    paused: false,
  };
  framesSeen = 0;
  framesDropped = 0; // gaps in frame_id, tolerated silently
  selectedLandmark: number | null = null;
  private lastFrameId: number | null = null;

  apply(msg: Message): void {
    switch (msg.kind) {
      case "server_hello":
        this.hello = msg;
        break;
      case "dataset_info":
        this.datasetInfo = msg;
        break;
      case "frame_points":
        if (this.lastFrameId !== null && msg.frameId > this.lastFrameId + 1) {
          this.framesDropped += msg.frameId - this.lastFrameId - 1;
        }
        this.lastFrameId = msg.frameId;
        this.points = msg;
        this.framesSeen += 1;
        break;
      case "frame_landmarks":
        this.landmarks = msg;
        break;
      case "error":
        this.toasts.push({ code: msg.code, detail: msg.detail, at: Date.now() });
        break;
      default:
        break; // client-bound stream carries no other message kinds
    }
  }

  landmarkCount(): number {
    return this.landmarks ? this.landmarks.lo.length / 2 : 0;
  }

  /** Fit the camera to the latest point cloud with a small margin. */
  fitCamera(width: number, height: number): void {
    const pts = this.points;
    if (!pts || pts.positions.length === 0) return;
    let minX = Infinity;
    let maxX = -Infinity;
    let minY = Infinity;
    let maxY = -Infinity;
    for (let i = 0; i < pts.positions.length; i += 2) {
      const x = pts.positions[i];
      const y = pts.positions[i + 1];
      if (x < minX) minX = x;
      if (x > maxX) maxX = x;
      if (y < minY) minY = y;
      if (y > maxY) maxY = y;
    }
    this.camera.centerX = (minX + maxX) / 2;
    this.camera.centerY = (minY + maxY) / 2;
    const spanX = Math.max(maxX - minX, 1e-6);
    const spanY = Math.max(maxY - minY, 1e-6);
    this.camera.scale = 0.9 * Math.min(width / spanX, height / spanY);
  }

  worldToScreen(x: number, y: number, width: number, height: number): [number, number] {
    return [
      (x - this.camera.centerX) * this.camera.scale + width / 2,
      (y - this.camera.centerY) * this.camera.scale + height / 2,
    ];
  }

  screenToWorld(sx: number, sy: number, width: number, height: number): [number, number] {
    return [
      (sx - width / 2) / this.camera.scale + this.camera.centerX,
      (sy - height / 2) / this.camera.scale + this.camera.centerY,
    ];
  }

  panBy(dxPixels: number, dyPixels: number): void {
    this.camera.centerX -= dxPixels / this.camera.scale;
    this.camera.centerY -= dyPixels / this.camera.scale;
  }

  zoomBy(factor: number): void {
    this.camera.scale = Math.min(Math.max(this.camera.scale * factor, 1e-3), 1e6);
  }
}
