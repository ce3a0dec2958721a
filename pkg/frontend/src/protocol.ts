/**
 * Wire protocol codec, byte-compatible with the engine server.
 *
 * Framing: u32 little-endian length | u8 tag | payload, where the length
 * covers tag + payload. Control payloads are UTF-8 JSON; frame payloads are
 * packed little-endian binary. Malformed input never throws: it decodes to
 * an ErrorMsg and the stream reader realigns at the next length prefix.
 */

export const PROTOCOL_VERSION = "1";

export const TAG_CLIENT_HELLO = 0x01;
export const TAG_SERVER_HELLO = 0x02;
export const TAG_LOAD_DATASET = 0x10;
export const TAG_DATASET_INFO = 0x11;
export const TAG_SET_PARAMS = 0x20;
export const TAG_MOVE_LANDMARK = 0x21;
export const TAG_ADD_LANDMARK = 0x22; // shared with DuplicateLandmark
export const TAG_REMOVE_LANDMARK = 0x23;
export const TAG_FRAME_LANDMARKS = 0x30;
export const TAG_FRAME_POINTS = 0x31;
export const TAG_ERROR = 0x7f;

const MAX_MESSAGE = 1 << 30;

export interface ClientHello {
  kind: "client_hello";
  protocolVersion: string;
}

export interface ServerHello {
  kind: "server_hello";
  protocolVersion: string;
  n: number;
  d: number;
  dimNames: string[];
}

export interface DatasetInfo {
  kind: "dataset_info";
  n: number;
  d: number;
  names: string[];
  mins: number[];
  maxs: number[];
}

export interface SetParams {
  kind: "set_params";
  params: {
    k?: number;
    mode?: string;
    sigma?: number;
    alpha?: number;
    alpha_km?: number;
    k_g?: number;
    paused?: boolean;
    color_dim?: number;
  };
}

export interface MoveLandmark {
  kind: "move_landmark";
  landmark: number;
  x: number;
  y: number;
  pinned: boolean;
}

export interface AddLandmark {
  kind: "add_landmark";
  x: number;
  y: number;
}

export interface DuplicateLandmark {
  kind: "duplicate_landmark";
  landmark: number;
}

export interface RemoveLandmark {
  kind: "remove_landmark";
  landmark: number;
}

export interface FrameLandmarks {
  kind: "frame_landmarks";
  lo: Float32Array; // 2g interleaved x,y
  edges: Uint32Array; // 2e interleaved i,j
}

export interface FramePoints {
  kind: "frame_points";
  frameId: number;
  positions: Float32Array; // 2n interleaved x,y
  colors: Uint8Array; // n
}

export interface ErrorMsg {
  kind: "error";
  code: string;
  detail: string;
}

export type Message =
  | ClientHello
  | ServerHello
  | DatasetInfo
  | SetParams
  | MoveLandmark
  | AddLandmark
  | DuplicateLandmark
  | RemoveLandmark
  | FrameLandmarks
  | FramePoints
  | ErrorMsg;

const textEncoder = new TextEncoder();
const textDecoder = new TextDecoder();

function frame(tag: number, payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(4 + 1 + payload.length);
  new DataView(out.buffer).setUint32(0, 1 + payload.length, true);
  out[4] = tag;
  out.set(payload, 5);
  return out;
}

function jsonFrame(tag: number, obj: unknown): Uint8Array {
  return frame(tag, textEncoder.encode(JSON.stringify(obj)));
}

export function encode(msg: Message): Uint8Array {
  switch (msg.kind) {
    case "client_hello":
      return jsonFrame(TAG_CLIENT_HELLO, { protocol_version: msg.protocolVersion });
    case "server_hello":
      return jsonFrame(TAG_SERVER_HELLO, {
        protocol_version: msg.protocolVersion,
        n: msg.n,
        d: msg.d,
        dim_names: msg.dimNames,
      });
    case "dataset_info":
      return jsonFrame(TAG_DATASET_INFO, {
        n: msg.n,
        d: msg.d,
        names: msg.names,
        mins: msg.mins,
        maxs: msg.maxs,
      });
    case "set_params":
      return jsonFrame(TAG_SET_PARAMS, msg.params);
    case "move_landmark":
      return jsonFrame(TAG_MOVE_LANDMARK, {
        id: msg.landmark,
        x: msg.x,
        y: msg.y,
        pinned: msg.pinned,
      });
    case "add_landmark":
      return jsonFrame(TAG_ADD_LANDMARK, { x: msg.x, y: msg.y });
    case "duplicate_landmark":
      return jsonFrame(TAG_ADD_LANDMARK, { id: msg.landmark });
    case "remove_landmark":
      return jsonFrame(TAG_REMOVE_LANDMARK, { id: msg.landmark });
    case "error":
      return jsonFrame(TAG_ERROR, { code: msg.code, detail: msg.detail });
    case "frame_landmarks": {
      const g = msg.lo.length / 2;
      const e = msg.edges.length / 2;
      const payload = new Uint8Array(4 + g * 8 + 4 + e * 8);
      const dv = new DataView(payload.buffer);
      dv.setUint32(0, g, true);
      let off = 4;
      for (let i = 0; i < msg.lo.length; i++, off += 4) dv.setFloat32(off, msg.lo[i], true);
      dv.setUint32(off, e, true);
      off += 4;
      for (let i = 0; i < msg.edges.length; i++, off += 4) dv.setUint32(off, msg.edges[i], true);
      return frame(TAG_FRAME_LANDMARKS, payload);
    }
    case "frame_points": {
      const n = msg.colors.length;
      const payload = new Uint8Array(8 + n * 9);
      const dv = new DataView(payload.buffer);
      dv.setUint32(0, msg.frameId, true);
      dv.setUint32(4, n, true);
      let off = 8;
      for (let i = 0; i < msg.positions.length; i++, off += 4) {
        dv.setFloat32(off, msg.positions[i], true);
      }
      payload.set(msg.colors, off);
      return frame(TAG_FRAME_POINTS, payload);
    }
  }
}

function err(code: string, detail = ""): ErrorMsg {
  return { kind: "error", code, detail };
}

function decodeJson(payload: Uint8Array): Record<string, unknown> | null {
  try {
    const obj = JSON.parse(textDecoder.decode(payload));
    return typeof obj === "object" && obj !== null ? (obj as Record<string, unknown>) : null;
  } catch {
    return null;
  }
}

function decodeBody(tag: number, payload: Uint8Array): Message {
  if (tag === TAG_FRAME_LANDMARKS || tag === TAG_FRAME_POINTS) {
    return decodeFrame(tag, payload);
  }
  const obj = decodeJson(payload);
  if (obj === null) return err("bad_json", `tag 0x${tag.toString(16)}`);
  try {
    switch (tag) {
      case TAG_CLIENT_HELLO:
        return { kind: "client_hello", protocolVersion: String(obj.protocol_version) };
      case TAG_SERVER_HELLO:
        return {
          kind: "server_hello",
          protocolVersion: String(obj.protocol_version),
          n: Number(obj.n),
          d: Number(obj.d),
          dimNames: (obj.dim_names as string[]).map(String),
        };
      case TAG_DATASET_INFO:
        return {
          kind: "dataset_info",
          n: Number(obj.n),
          d: Number(obj.d),
          names: (obj.names as string[]).map(String),
          mins: (obj.mins as number[]).map(Number),
          maxs: (obj.maxs as number[]).map(Number),
        };
      case TAG_SET_PARAMS:
        return { kind: "set_params", params: obj as SetParams["params"] };
      case TAG_MOVE_LANDMARK:
        if (obj.id === undefined || obj.x === undefined || obj.y === undefined) {
          return err("bad_payload", "move_landmark missing fields");
        }
        return {
          kind: "move_landmark",
          landmark: Number(obj.id),
          x: Number(obj.x),
          y: Number(obj.y),
          pinned: Boolean(obj.pinned),
        };
      case TAG_ADD_LANDMARK:
        if (obj.id !== undefined) {
          return { kind: "duplicate_landmark", landmark: Number(obj.id) };
        }
        if (obj.x === undefined || obj.y === undefined) {
          return err("bad_payload", "add_landmark missing fields");
        }
        return { kind: "add_landmark", x: Number(obj.x), y: Number(obj.y) };
      case TAG_REMOVE_LANDMARK:
        if (obj.id === undefined) return err("bad_payload", "remove_landmark missing id");
        return { kind: "remove_landmark", landmark: Number(obj.id) };
      case TAG_ERROR:
        return { kind: "error", code: String(obj.code), detail: String(obj.detail ?? "") };
      default:
        return err("bad_tag", `0x${tag.toString(16)}`);
    }
  } catch {
    return err("bad_payload", `tag 0x${tag.toString(16)}`);
  }
}

function decodeFrame(tag: number, payload: Uint8Array): Message {
  const dv = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  try {
    if (tag === TAG_FRAME_LANDMARKS) {
      const g = dv.getUint32(0, true);
      let off = 4;
      if (payload.length < off + g * 8 + 4) return err("bad_payload", "FrameLandmarks short");
      const lo = new Float32Array(2 * g);
      for (let i = 0; i < 2 * g; i++, off += 4) lo[i] = dv.getFloat32(off, true);
      const e = dv.getUint32(off, true);
      off += 4;
      if (payload.length !== off + e * 8) return err("bad_payload", "FrameLandmarks length mismatch");
      const edges = new Uint32Array(2 * e);
      for (let i = 0; i < 2 * e; i++, off += 4) edges[i] = dv.getUint32(off, true);
      return { kind: "frame_landmarks", lo, edges };
    }
    const frameId = dv.getUint32(0, true);
    const n = dv.getUint32(4, true);
    if (payload.length !== 8 + n * 9) return err("bad_payload", "FramePoints length mismatch");
    const positions = new Float32Array(2 * n);
    let off = 8;
    for (let i = 0; i < 2 * n; i++, off += 4) positions[i] = dv.getFloat32(off, true);
    const colors = payload.slice(off, off + n);
    return { kind: "frame_points", frameId, positions, colors };
  } catch {
    return err("bad_payload", `tag 0x${tag.toString(16)}`);
  }
}

/** Decode the first complete message of a buffer; never throws. */
export function decode(data: Uint8Array): Message {
  if (data.length < 5) return err("truncated", `${data.length} bytes`);
  const length = new DataView(data.buffer, data.byteOffset, data.byteLength).getUint32(0, true);
  if (length < 1 || length > MAX_MESSAGE) return err("bad_length", String(length));
  if (data.length < 4 + length) return err("truncated", `need ${4 + length}, have ${data.length}`);
  return decodeBody(data[4], data.subarray(5, 4 + length));
}

/**
 * Incremental reader over the framed byte stream; arbitrary chunk
 * boundaries are fine, corrupted frames surface as error messages.
 */
export class StreamDecoder {
  private buf = new Uint8Array(0);

  feed(data: Uint8Array): Message[] {
    const merged = new Uint8Array(this.buf.length + data.length);
    merged.set(this.buf, 0);
    merged.set(data, this.buf.length);
    this.buf = merged;
    const out: Message[] = [];
    for (;;) {
      if (this.buf.length < 4) return out;
      const length = new DataView(this.buf.buffer, this.buf.byteOffset).getUint32(0, true);
      if (length < 1 || length > MAX_MESSAGE) {
        this.buf = this.buf.subarray(4); // hopeless prefix, skip and rescan
        out.push(err("bad_length", String(length)));
        continue;
      }
      if (this.buf.length < 4 + length) return out;
      const one = this.buf.subarray(0, 4 + length);
      this.buf = this.buf.subarray(4 + length);
      out.push(decode(one));
    }
  }
}
