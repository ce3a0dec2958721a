"""WebSocket server: one engine loop, any number of viewer clients.

The engine ticks on its own cadence (best effort at the target rate, never
busy-spinning) in a worker thread; protocol handlers turn incoming control
messages into engine commands.  Clients that cannot keep up lose intermediate
FramePoints — control messages are never dropped — and see the gap as a jump
in frame_id.
"""

from __future__ import annotations

import asyncio
import threading
from typing import Optional

from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

from . import protocol
from .engine import (
    AddLandmark,
    Command,
    DuplicateLandmark,
    Engine,
    LoadDataset,
    MoveLandmark,
    RemoveLandmark,
    SetMode,
    SetParams,
)


class ProtocolCommandError(ValueError):
    pass


def commands_from_message(msg: protocol.Message, engine: Engine) -> list[Command]:
    """Translate a wire message into engine commands.

    Wire landmark ids are row indices into the latest FrameLandmarks block;
    they are resolved against the engine's stable ids here.
    """
    ids = engine.state.model.ids

    def stable(row: int) -> int:
        if not 0 <= row < len(ids):
            raise ProtocolCommandError(f"landmark row {row} out of range")
        return ids[row]

    if isinstance(msg, protocol.LoadDatasetMsg):
        return [LoadDataset(path=msg.path, fmt=msg.format, transform=msg.transform)]
    if isinstance(msg, protocol.SetParamsMsg):
        body = msg.as_dict()
        out: list[Command] = []
        mode = body.pop("mode", None)
        if mode is not None:
            out.append(SetMode(mode=str(mode)))
        if body:
            out.append(
                SetParams(
                    k=body.get("k"),
                    sigma=body.get("sigma"),
                    alpha=body.get("alpha"),
                    alpha_km=body.get("alpha_km"),
                    k_g=body.get("k_g"),
                    paused=body.get("paused"),
                    color_dim=body.get("color_dim"),
                )
            )
        return out
    if isinstance(msg, protocol.MoveLandmarkMsg):
        return [
            MoveLandmark(landmark_id=stable(msg.landmark), x=msg.x, y=msg.y, pinned=msg.pinned)
        ]
    if isinstance(msg, protocol.AddLandmarkMsg):
        return [AddLandmark(x=msg.x, y=msg.y)]
    if isinstance(msg, protocol.DuplicateLandmarkMsg):
        return [DuplicateLandmark(landmark_id=stable(msg.landmark))]
    if isinstance(msg, protocol.RemoveLandmarkMsg):
        return [RemoveLandmark(landmark_id=stable(msg.landmark))]
    return []


class _Client:
    def __init__(self, ws):
        self.ws = ws
        self.control: asyncio.Queue[bytes] = asyncio.Queue()
        self.frame_slot: Optional[tuple[bytes, bytes]] = None
        self.wake = asyncio.Event()
        self.hello_done = False

    def offer_frame(self, landmarks: bytes, points: bytes) -> None:
        self.frame_slot = (landmarks, points)  # newest frame wins
        self.wake.set()

    def offer_control(self, data: bytes) -> None:
        self.control.put_nowait(data)
        self.wake.set()

    async def sender(self) -> None:
        try:
            while True:
                await self.wake.wait()
                self.wake.clear()
                while not self.control.empty():
                    await self.ws.send(self.control.get_nowait())
                slot, self.frame_slot = self.frame_slot, None
                if slot is not None and self.hello_done:
                    await self.ws.send(slot[0])
                    await self.ws.send(slot[1])
        except ConnectionClosed:
            pass


class EngineServer:
    def __init__(
        self,
        engine: Engine,
        host: str = "127.0.0.1",
        port: int = 7878,
        fps: float = 30.0,
        record: Optional[list] = None,
        replay: Optional[list] = None,
    ):
        self.engine = engine
        self.host = host
        self.port = port
        self.fps = fps
        self.record = record  # list collecting (tick_index, Command)
        self._replay: dict[int, list[Command]] = {}
        for tick_idx, cmd in replay or ():
            self._replay.setdefault(int(tick_idx), []).append(cmd)
        self._clients: set[_Client] = set()
        self._lock = threading.Lock()  # guards engine queue vs. the tick thread
        self._stop = asyncio.Event()
        self._tick_index = 0
        self.bound_port: Optional[int] = None
        self.started = asyncio.Event()

    # -- engine side ---------------------------------------------------------

    def _submit(self, cmd: Command) -> None:
        with self._lock:
            if self.record is not None:
                self.record.append((self._tick_index, cmd))
            self.engine.submit(cmd)

    def _locked_tick(self):
        with self._lock:
            for cmd in self._replay.pop(self._tick_index, ()):
                self.engine.submit(cmd)
            packet = self.engine.tick()
            errors = self.engine.drain_errors()
            self._tick_index += 1
            return packet, errors

    async def _engine_loop(self) -> None:
        loop = asyncio.get_running_loop()
        period = 1.0 / self.fps if self.fps > 0 else 0.0
        next_deadline = loop.time()
        while not self._stop.is_set() and not self.engine.shutdown_requested:
            packet, errors = await loop.run_in_executor(None, self._locked_tick)
            lm = protocol.encode(
                protocol.FrameLandmarks(lo=packet.landmarks_lo, edges=packet.edges.pairs)
            )
            pts = protocol.encode(
                protocol.FramePoints(
                    frame_id=packet.frame_id,
                    positions=packet.positions,
                    colors=packet.colors,
                )
            )
            err_msgs = [
                protocol.encode(protocol.ErrorMsg(code="command_rejected", detail=e))
                for e in errors
            ]
            for client in list(self._clients):
                for e in err_msgs:
                    client.offer_control(e)
                client.offer_frame(lm, pts)
            next_deadline += period
            delay = next_deadline - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_deadline = loop.time()  # behind schedule; do not busy-spin
        self._stop.set()

    # -- client side -----------------------------------------------------------

    def _hello_messages(self) -> list[bytes]:
        ds = self.engine.state.dataset
        return [
            protocol.encode(
                protocol.ServerHello(
                    protocol_version=protocol.PROTOCOL_VERSION,
                    n=ds.n,
                    d=ds.d,
                    dim_names=ds.dim_names,
                )
            ),
            protocol.encode(
                protocol.DatasetInfo(
                    n=ds.n,
                    d=ds.d,
                    names=ds.dim_names,
                    mins=tuple(float(v) for v in ds.dim_stats.min),
                    maxs=tuple(float(v) for v in ds.dim_stats.max),
                )
            ),
        ]

    async def _handler(self, ws) -> None:
        client = _Client(ws)
        self._clients.add(client)
        sender = asyncio.create_task(client.sender())
        decoder = protocol.StreamDecoder()
        try:
            async for raw in ws:
                if isinstance(raw, str):
                    raw = raw.encode("utf-8")
                for msg in decoder.feed(raw):
                    await self._on_message(client, msg)
        except ConnectionClosed:
            pass
        finally:
            self._clients.discard(client)
            sender.cancel()

    async def _on_message(self, client: _Client, msg: protocol.Message) -> None:
        if isinstance(msg, protocol.ClientHello):
            if msg.protocol_version != protocol.PROTOCOL_VERSION:
                client.offer_control(
                    protocol.encode(
                        protocol.ErrorMsg(
                            code="version_mismatch",
                            detail=f"server speaks {protocol.PROTOCOL_VERSION}",
                        )
                    )
                )
                return
            for data in self._hello_messages():
                client.offer_control(data)
            client.hello_done = True
            return
        if isinstance(msg, protocol.ErrorMsg):
            # decode failure or a client-relayed error: report back, keep going
            client.offer_control(protocol.encode(msg))
            return
        try:
            cmds = commands_from_message(msg, self.engine)
        except ProtocolCommandError as exc:
            client.offer_control(
                protocol.encode(protocol.ErrorMsg(code="bad_command", detail=str(exc)))
            )
            return
        for cmd in cmds:
            self._submit(cmd)

    # -- lifecycle ---------------------------------------------------------------

    async def run(self) -> None:
        async with serve(self._handler, self.host, self.port, max_size=None) as server:
            self.bound_port = server.sockets[0].getsockname()[1]
            self.started.set()
            engine_task = asyncio.create_task(self._engine_loop())
            await self._stop.wait()
            engine_task.cancel()

    def request_stop(self) -> None:
        self._stop.set()


def run_server(
    engine: Engine, host: str, port: int, fps: float, record=None, replay=None
) -> None:
    server = EngineServer(
        engine, host=host, port=port, fps=fps, record=record, replay=replay
    )
    try:
        asyncio.run(server.run())
    except KeyboardInterrupt:
        pass
