/**
 * The full client loop against a stub server replaying a fixture stream:
 * hello handshake, fixture rendering, a coalesced drag, and control
 * messages, verified by transcript comparison on the stub's side.
 */

import { describe, expect, it } from "vitest";

import { EngineClient, type WireSocket } from "../src/client.js";
import { ControlPanel } from "../src/controls.js";
import { DragController } from "../src/drag.js";
import { StreamDecoder, encode, type Message } from "../src/protocol.js";
import { Renderer, type Draw2D } from "../src/renderer.js";
import { ViewState } from "../src/view.js";
import { goldenFramePointsBytes } from "./protocol.test.js";

/** Stub server end of the socket: records the client's bytes as a transcript. */
class StubServer implements WireSocket {
  transcript: Message[] = [];
  private decoder = new StreamDecoder();
  private openCb: (() => void) | null = null;
  private messageCb: ((data: ArrayBuffer) => void) | null = null;

  set onopen(cb: () => void) {
    this.openCb = cb;
  }
  set onmessage(cb: (data: ArrayBuffer) => void) {
    this.messageCb = cb;
  }
  set onclose(_cb: () => void) {}

  send(data: Uint8Array): void {
    this.transcript.push(...this.decoder.feed(data));
  }
  close(): void {}

  connect(): void {
    this.openCb?.();
  }
  push(bytes: Uint8Array): void {
    const copy = bytes.slice();
    this.messageCb?.(copy.buffer.slice(0, copy.byteLength) as ArrayBuffer);
  }
  pushMessage(msg: Message): void {
    this.push(encode(msg));
  }
}

class CountingContext implements Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  globalAlpha = 1;
  lineWidth = 1;
  sprites: Array<{ x: number; y: number; fill: string }> = [];
  discs = 0;
  cleared = 0;
  clearRect(): void {
    this.cleared++;
    this.sprites = [];
    this.discs = 0;
  }
  fillRect(x: number, y: number): void {
    this.sprites.push({ x, y, fill: String(this.fillStyle) });
  }
  beginPath(): void {}
  moveTo(): void {}
  lineTo(): void {}
  stroke(): void {}
  arc(): void {}
  fill(): void {
    this.discs++;
  }
}

function fixtureStream(server: StubServer): void {
  server.pushMessage({
    kind: "server_hello",
    protocolVersion: "1",
    n: 2,
    d: 3,
    dimNames: ["CD4", "CD8", "FSC"],
  });
  server.pushMessage({
    kind: "dataset_info",
    n: 2,
    d: 3,
    names: ["CD4", "CD8", "FSC"],
    mins: [0, 0, 0],
    maxs: [1, 1, 1],
  });
  server.pushMessage({
    kind: "frame_landmarks",
    lo: new Float32Array([0, 0, 1, -1]),
    edges: new Uint32Array([0, 1]),
  });
  server.push(goldenFramePointsBytes()); // the pinned 2-point fixture
}

describe("UI loop against a stub server", () => {
  it("handshakes, renders the fixture, drags, and drives the controls", () => {
    const view = new ViewState();
    const server = new StubServer();
    const client = new EngineClient(server, view);
    server.connect();

    // the replayed fixture stream reaches the view
    fixtureStream(server);
    expect(view.hello?.n).toBe(2);
    expect(view.datasetInfo?.names).toEqual(["CD4", "CD8", "FSC"]);
    expect(view.points?.frameId).toBe(7);

    // the 2-point fixture renders as exactly 2 sprites plus 2 landmarks
    view.camera = { centerX: 0, centerY: 0, scale: 100 };
    const ctx = new CountingContext();
    new Renderer().render(view, ctx, 200, 200);
    expect(ctx.sprites).toHaveLength(2);
    expect(ctx.discs).toBe(2);
    expect(ctx.sprites[0]).toMatchObject({ x: 99, y: 99 });
    expect(ctx.sprites[1]).toMatchObject({ x: 199, y: -1 });

    // a drag: 120 pointer events at 60fps, coalesced, release unpins
    const pump: Array<() => void> = [];
    const drag = new DragController(view, new Renderer(), (m) => client.send(m), (cb) =>
      pump.push(cb),
    );
    expect(drag.pointerDown(100, 100, 200, 200)).toBe(true);
    for (let i = 0; i < 120; i++) {
      drag.pointerMove(100 + i / 2, 100 - i / 2, 200, 200);
      if (i % 2 === 1) pump.splice(0).forEach((cb) => cb());
    }
    drag.pointerUp();

    // the controls emit SetParams
    const panel = new ControlPanel(view, (m) => client.send(m));
    panel.setSigma(0.8);
    panel.setAlpha(0.05);
    panel.setK(8);

    // ---- transcript comparison on the stub server's side ----
    const t = server.transcript;
    expect(t[0]).toEqual({ kind: "client_hello", protocolVersion: "1" });

    const moves = t.filter((m) => m.kind === "move_landmark");
    expect(moves.length).toBeGreaterThan(1);
    expect(moves.length).toBeLessThanOrEqual(62); // 60 frames + grab + release
    for (const m of moves.slice(0, -1)) expect(m).toMatchObject({ pinned: true, landmark: 0 });
    const last = moves[moves.length - 1];
    expect(last).toMatchObject({ kind: "move_landmark", pinned: false, landmark: 0 });
    expect((last as { x: number }).x).toBeCloseTo(0.595, 3);
    expect((last as { y: number }).y).toBeCloseTo(-0.595, 3);

    const tail = t.slice(t.indexOf(last) + 1);
    expect(tail).toEqual([
      { kind: "set_params", params: { sigma: 0.8 } },
      { kind: "set_params", params: { alpha: 0.05 } },
      { kind: "set_params", params: { k: 8 } },
    ]);

    // message-order preservation: the transcript is exactly hello, moves, params
    expect(t.slice(1, 1 + moves.length)).toEqual(moves);
  });

  it("tolerates frame gaps silently and surfaces server errors as toasts", () => {
    const view = new ViewState();
    const server = new StubServer();
    new EngineClient(server, view);
    server.connect();
    fixtureStream(server);
    server.pushMessage({
      kind: "frame_points",
      frameId: 11, // gap after 7
      positions: new Float32Array([0, 0, 0, 0]),
      colors: new Uint8Array([1, 2]),
    });
    expect(view.points?.frameId).toBe(11);
    expect(view.framesDropped).toBe(3);
    expect(view.toasts).toHaveLength(0);

    server.pushMessage({ kind: "error", code: "command_rejected", detail: "bad id" });
    expect(view.toasts).toHaveLength(1);
    expect(view.toasts[0].code).toBe("command_rejected");
  });

  it("splits the incoming stream correctly even when frames arrive fragmented", () => {
    const view = new ViewState();
    const server = new StubServer();
    new EngineClient(server, view);
    server.connect();
    const bytes = goldenFramePointsBytes();
    server.push(bytes.subarray(0, 10));
    expect(view.points).toBeNull(); // no partial frame delivered
    server.push(bytes.subarray(10));
    expect(view.points?.frameId).toBe(7);
  });
});
