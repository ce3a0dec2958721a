"""Wire protocol between the engine and UI clients.

Framing: 4-byte little-endian unsigned length, then a 1-byte type tag, then
the payload; the length covers tag + payload.  Control payloads are UTF-8
JSON; frame payloads are packed little-endian binary.  Malformed input never
raises: ``decode`` returns an Error message (tag 0x7F) with a machine-readable
code, and a stream reader re-synchronizes at the next length prefix.

Landmark ids on the wire are row indices into the most recent FrameLandmarks
block; the server maps them to the engine's stable ids on receipt.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

PROTOCOL_VERSION = "1"

TAG_CLIENT_HELLO = 0x01
TAG_SERVER_HELLO = 0x02
TAG_LOAD_DATASET = 0x10
TAG_DATASET_INFO = 0x11
TAG_SET_PARAMS = 0x20
TAG_MOVE_LANDMARK = 0x21
TAG_ADD_LANDMARK = 0x22  # shared with DuplicateLandmark; payload keys differ
TAG_REMOVE_LANDMARK = 0x23
TAG_FRAME_LANDMARKS = 0x30
TAG_FRAME_POINTS = 0x31
TAG_ERROR = 0x7F

MAX_MESSAGE = 1 << 30


@dataclass(frozen=True)
class ClientHello:
    protocol_version: str = PROTOCOL_VERSION


@dataclass(frozen=True)
class ServerHello:
    protocol_version: str
    n: int
    d: int
    dim_names: tuple[str, ...]


@dataclass(frozen=True)
class LoadDatasetMsg:
    path: str
    format: Optional[str] = None
    transform: Optional[str] = None


@dataclass(frozen=True)
class DatasetInfo:
    n: int
    d: int
    names: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]


@dataclass(frozen=True)
class SetParamsMsg:
    params: tuple[tuple[str, object], ...]  # sorted (key, value) pairs

    @classmethod
    def of(cls, **kwargs) -> "SetParamsMsg":
        return cls(params=tuple(sorted(kwargs.items())))

    def as_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class MoveLandmarkMsg:
    landmark: int
    x: float
    y: float
    pinned: bool


@dataclass(frozen=True)
class AddLandmarkMsg:
    x: float
    y: float


@dataclass(frozen=True)
class DuplicateLandmarkMsg:
    landmark: int


@dataclass(frozen=True)
class RemoveLandmarkMsg:
    landmark: int


@dataclass(eq=False)
class FrameLandmarks:
    lo: np.ndarray  # g x 2 float32
    edges: np.ndarray  # e x 2 uint32

    def __eq__(self, other):
        return (
            isinstance(other, FrameLandmarks)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.edges, other.edges)
        )


@dataclass(eq=False)
class FramePoints:
    frame_id: int
    positions: np.ndarray  # n x 2 float32
    colors: np.ndarray  # n uint8

    def __eq__(self, other):
        return (
            isinstance(other, FramePoints)
            and self.frame_id == other.frame_id
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.colors, other.colors)
        )


@dataclass(frozen=True)
class ErrorMsg:
    code: str
    detail: str = ""


Message = Union[
    ClientHello,
    ServerHello,
    LoadDatasetMsg,
    DatasetInfo,
    SetParamsMsg,
    MoveLandmarkMsg,
    AddLandmarkMsg,
    DuplicateLandmarkMsg,
    RemoveLandmarkMsg,
    FrameLandmarks,
    FramePoints,
    ErrorMsg,
]


def _json_payload(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _encode_body(msg: Message) -> tuple[int, bytes]:
    if isinstance(msg, ClientHello):
        return TAG_CLIENT_HELLO, _json_payload({"protocol_version": msg.protocol_version})
    if isinstance(msg, ServerHello):
        return TAG_SERVER_HELLO, _json_payload(
            {
                "protocol_version": msg.protocol_version,
                "n": msg.n,
                "d": msg.d,
                "dim_names": list(msg.dim_names),
            }
        )
    if isinstance(msg, LoadDatasetMsg):
        return TAG_LOAD_DATASET, _json_payload(
            {"path": msg.path, "format": msg.format, "transform": msg.transform}
        )
    if isinstance(msg, DatasetInfo):
        return TAG_DATASET_INFO, _json_payload(
            {
                "n": msg.n,
                "d": msg.d,
                "names": list(msg.names),
                "mins": list(msg.mins),
                "maxs": list(msg.maxs),
            }
        )
    if isinstance(msg, SetParamsMsg):
        return TAG_SET_PARAMS, _json_payload(msg.as_dict())
    if isinstance(msg, MoveLandmarkMsg):
        return TAG_MOVE_LANDMARK, _json_payload(
            {"id": msg.landmark, "x": msg.x, "y": msg.y, "pinned": msg.pinned}
        )
    if isinstance(msg, AddLandmarkMsg):
        return TAG_ADD_LANDMARK, _json_payload({"x": msg.x, "y": msg.y})
    if isinstance(msg, DuplicateLandmarkMsg):
        return TAG_ADD_LANDMARK, _json_payload({"id": msg.landmark})
    if isinstance(msg, RemoveLandmarkMsg):
        return TAG_REMOVE_LANDMARK, _json_payload({"id": msg.landmark})
    if isinstance(msg, FrameLandmarks):
        lo = np.ascontiguousarray(msg.lo, dtype="<f4")
        edges = np.ascontiguousarray(msg.edges, dtype="<u4")
        return TAG_FRAME_LANDMARKS, (
            struct.pack("<I", lo.shape[0])
            + lo.tobytes()
            + struct.pack("<I", edges.shape[0])
            + edges.tobytes()
        )
    if isinstance(msg, FramePoints):
        pos = np.ascontiguousarray(msg.positions, dtype="<f4")
        colors = np.ascontiguousarray(msg.colors, dtype=np.uint8)
        return TAG_FRAME_POINTS, (
            struct.pack("<II", msg.frame_id, pos.shape[0]) + pos.tobytes() + colors.tobytes()
        )
    if isinstance(msg, ErrorMsg):
        return TAG_ERROR, _json_payload({"code": msg.code, "detail": msg.detail})
    raise TypeError(f"cannot encode {type(msg).__name__}")


def encode(msg: Message) -> bytes:
    tag, payload = _encode_body(msg)
    return struct.pack("<I", 1 + len(payload)) + bytes([tag]) + payload


def _decode_json(payload: bytes) -> dict | None:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (ValueError, UnicodeDecodeError):
        return None
    return obj if isinstance(obj, dict) else None


def _decode_body(tag: int, payload: bytes) -> Message:
    if tag in (TAG_FRAME_LANDMARKS, TAG_FRAME_POINTS):
        return _decode_frame(tag, payload)
    obj = _decode_json(payload)
    if obj is None:
        return ErrorMsg(code="bad_json", detail=f"tag 0x{tag:02x}")
    try:
        if tag == TAG_CLIENT_HELLO:
            return ClientHello(protocol_version=str(obj["protocol_version"]))
        if tag == TAG_SERVER_HELLO:
            return ServerHello(
                protocol_version=str(obj["protocol_version"]),
                n=int(obj["n"]),
                d=int(obj["d"]),
                dim_names=tuple(obj["dim_names"]),
            )
        if tag == TAG_LOAD_DATASET:
            return LoadDatasetMsg(
                path=str(obj["path"]),
                format=obj.get("format"),
                transform=obj.get("transform"),
            )
        if tag == TAG_DATASET_INFO:
            return DatasetInfo(
                n=int(obj["n"]),
                d=int(obj["d"]),
                names=tuple(obj["names"]),
                mins=tuple(float(v) for v in obj["mins"]),
                maxs=tuple(float(v) for v in obj["maxs"]),
            )
        if tag == TAG_SET_PARAMS:
            return SetParamsMsg(params=tuple(sorted(obj.items())))
        if tag == TAG_MOVE_LANDMARK:
            return MoveLandmarkMsg(
                landmark=int(obj["id"]),
                x=float(obj["x"]),
                y=float(obj["y"]),
                pinned=bool(obj["pinned"]),
            )
        if tag == TAG_ADD_LANDMARK:
            if "id" in obj:
                return DuplicateLandmarkMsg(landmark=int(obj["id"]))
            return AddLandmarkMsg(x=float(obj["x"]), y=float(obj["y"]))
        if tag == TAG_REMOVE_LANDMARK:
            return RemoveLandmarkMsg(landmark=int(obj["id"]))
        if tag == TAG_ERROR:
            return ErrorMsg(code=str(obj["code"]), detail=str(obj.get("detail", "")))
    except (KeyError, TypeError, ValueError) as exc:
        return ErrorMsg(code="bad_payload", detail=f"tag 0x{tag:02x}: {exc}")
    return ErrorMsg(code="bad_tag", detail=f"0x{tag:02x}")


def _decode_frame(tag: int, payload: bytes) -> Message:
    try:
        if tag == TAG_FRAME_LANDMARKS:
            (g,) = struct.unpack_from("<I", payload, 0)
            off = 4
            lo = np.frombuffer(payload, dtype="<f4", count=g * 2, offset=off).reshape(g, 2)
            off += g * 8
            (e,) = struct.unpack_from("<I", payload, off)
            off += 4
            edges = np.frombuffer(payload, dtype="<u4", count=e * 2, offset=off).reshape(e, 2)
            if off + e * 8 != len(payload):
                return ErrorMsg(code="bad_payload", detail="FrameLandmarks length mismatch")
            return FrameLandmarks(lo=lo.copy(), edges=edges.copy())
        frame_id, n = struct.unpack_from("<II", payload, 0)
        pos = np.frombuffer(payload, dtype="<f4", count=n * 2, offset=8).reshape(n, 2)
        colors = np.frombuffer(payload, dtype=np.uint8, count=n, offset=8 + n * 8)
        if 8 + n * 9 != len(payload):
            return ErrorMsg(code="bad_payload", detail="FramePoints length mismatch")
        return FramePoints(frame_id=frame_id, positions=pos.copy(), colors=colors.copy())
    except (struct.error, ValueError) as exc:
        return ErrorMsg(code="bad_payload", detail=f"tag 0x{tag:02x}: {exc}")


def decode(data: bytes) -> Message:
    """Decode the first complete message in `data`; never raises on bad input."""
    if len(data) < 5:
        return ErrorMsg(code="truncated", detail=f"{len(data)} bytes")
    (length,) = struct.unpack_from("<I", data, 0)
    if length < 1 or length > MAX_MESSAGE:
        return ErrorMsg(code="bad_length", detail=str(length))
    if len(data) < 4 + length:
        return ErrorMsg(code="truncated", detail=f"need {4 + length}, have {len(data)}")
    tag = data[4]
    return _decode_body(tag, bytes(data[5 : 4 + length]))


class StreamDecoder:
    """Incremental reader over the framed byte stream.

    Feeding arbitrary chunk boundaries is fine; a corrupted or unknown
    message surfaces as an ErrorMsg and reading continues at the next
    length prefix.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message]:
        self._buf.extend(data)
        out: list[Message] = []
        while True:
            if len(self._buf) < 4:
                return out
            (length,) = struct.unpack_from("<I", self._buf, 0)
            if length < 1 or length > MAX_MESSAGE:
                del self._buf[:4]  # hopeless prefix; skip it and rescan
                out.append(ErrorMsg(code="bad_length", detail=str(length)))
                continue
            if len(self._buf) < 4 + length:
                return out
            frame = bytes(self._buf[: 4 + length])
            del self._buf[: 4 + length]
            out.append(decode(frame))
