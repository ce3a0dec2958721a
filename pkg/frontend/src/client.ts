/**
 * Connection glue: a socket in, decoded messages into the ViewState, and a
 * single ordered send queue out (user actions leave in the order performed).
 *
 * The socket is injected through a minimal interface so a stub server can
 * drive the full loop in tests; the page passes a real WebSocket.
 */

import { PROTOCOL_VERSION, StreamDecoder, encode, type Message } from "./protocol.js";
import type { ViewState } from "./view.js";

export interface WireSocket {
  send(data: Uint8Array): void;
  close(): void;
  set onopen(cb: () => void);
  set onmessage(cb: (data: ArrayBuffer) => void);
  set onclose(cb: () => void);
}

export class EngineClient {
  private decoder = new StreamDecoder();
  connected = false;

  constructor(
    private readonly socket: WireSocket,
    readonly view: ViewState,
    private readonly onFrame?: () => void,
  ) {
    socket.onopen = () => {
      this.connected = true;
      this.send({ kind: "client_hello", protocolVersion: PROTOCOL_VERSION });
    };
    socket.onmessage = (data: ArrayBuffer) => {
      for (const msg of this.decoder.feed(new Uint8Array(data))) {
        this.view.apply(msg);
        if (msg.kind === "frame_points") this.onFrame?.();
      }
    };
    socket.onclose = () => {
      this.connected = false;
    };
  }

  send(msg: Message): void {
    this.socket.send(encode(msg));
  }

  close(): void {
    this.socket.close();
  }
}

/** Adapt a browser WebSocket to the WireSocket interface. */
export function wrapWebSocket(ws: WebSocket): WireSocket {
  ws.binaryType = "arraybuffer";
  return {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    set onopen(cb: () => void) {
      ws.onopen = cb;
    },
    set onmessage(cb: (data: ArrayBuffer) => void) {
      ws.onmessage = (ev) => {
        if (ev.data instanceof ArrayBuffer) cb(ev.data);
      };
    },
    set onclose(cb: () => void) {
      ws.onclose = cb;
    },
  };
}
