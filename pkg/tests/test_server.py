"""End-to-end exercise of the websocket server with a real client."""

import asyncio

import numpy as np

from embedview import protocol
from embedview.core import Dataset
from embedview.datagen import gaussians
from embedview.engine import Engine
from embedview.server import EngineServer


async def _drive_session():
    from websockets.asyncio.client import connect

    pts, _ = gaussians(2, 300, 4, seed=4)
    dataset = Dataset.from_points(pts)
    engine = Engine(dataset, seed=5, k=8, grid=(4, 4))
    server = EngineServer(engine, host="127.0.0.1", port=0, fps=60.0)
    run_task = asyncio.create_task(server.run())
    await asyncio.wait_for(server.started.wait(), 5)

    received = []
    async with connect(f"ws://127.0.0.1:{server.bound_port}") as ws:
        dec = protocol.StreamDecoder()

        async def read_until(pred, timeout=5.0):
            deadline = asyncio.get_running_loop().time() + timeout
            while True:
                for m in list(received):
                    if pred(m):
                        return m
                remaining = deadline - asyncio.get_running_loop().time()
                raw = await asyncio.wait_for(ws.recv(), remaining)
                if isinstance(raw, str):
                    raw = raw.encode()
                received.extend(dec.feed(raw))

        await ws.send(protocol.encode(protocol.ClientHello()))
        hello = await read_until(lambda m: isinstance(m, protocol.ServerHello))
        info = await read_until(lambda m: isinstance(m, protocol.DatasetInfo))
        first_pts = await read_until(lambda m: isinstance(m, protocol.FramePoints))
        first_lms = await read_until(lambda m: isinstance(m, protocol.FrameLandmarks))

        await ws.send(
            protocol.encode(protocol.MoveLandmarkMsg(landmark=3, x=9.0, y=-9.0, pinned=True))
        )
        moved = await read_until(
            lambda m: isinstance(m, protocol.FrameLandmarks)
            and np.array_equal(m.lo[3], np.float32([9.0, -9.0]))
        )

        await ws.send(protocol.encode(protocol.SetParamsMsg.of(k=4)))
        await ws.send(protocol.encode(protocol.MoveLandmarkMsg(landmark=999, x=0, y=0, pinned=False)))
        err = await read_until(lambda m: isinstance(m, protocol.ErrorMsg))
        # let at least two more ticks run so queued SetParams is surely applied
        seen_max = max(m.frame_id for m in received if isinstance(m, protocol.FramePoints))
        await read_until(
            lambda m: isinstance(m, protocol.FramePoints) and m.frame_id >= seen_max + 2
        )

        frames = [m for m in received if isinstance(m, protocol.FramePoints)]

    server.request_stop()
    await asyncio.wait_for(run_task, 5)
    return hello, info, first_pts, first_lms, moved, err, frames, engine


def test_server_round_trip():
    hello, info, first_pts, first_lms, moved, err, frames, engine = asyncio.run(
        _drive_session()
    )
    assert hello.protocol_version == protocol.PROTOCOL_VERSION
    assert hello.n == 300 and hello.d == 4
    assert info.names == engine.state.dataset.dim_names
    assert first_pts.positions.shape == (300, 2)
    assert first_pts.colors.shape == (300,)
    assert first_lms.lo.shape == (16, 2)
    assert moved is not None
    assert err.code in ("command_rejected", "bad_command")
    assert engine.state.embed_params.k == 4
    # frame ids strictly increase even when intermediate frames are dropped
    ids = [f.frame_id for f in frames]
    assert all(b > a for a, b in zip(ids, ids[1:]))


def test_version_mismatch_gets_error():
    async def run():
        from websockets.asyncio.client import connect

        pts, _ = gaussians(1, 50, 2, seed=1)
        engine = Engine(Dataset.from_points(pts), seed=1, k=4, grid=(2, 2))
        server = EngineServer(engine, host="127.0.0.1", port=0, fps=30.0)
        task = asyncio.create_task(server.run())
        await asyncio.wait_for(server.started.wait(), 5)
        async with connect(f"ws://127.0.0.1:{server.bound_port}") as ws:
            await ws.send(protocol.encode(protocol.ClientHello(protocol_version="0")))
            dec = protocol.StreamDecoder()
            raw = await asyncio.wait_for(ws.recv(), 5)
            msgs = dec.feed(raw if isinstance(raw, bytes) else raw.encode())
            assert any(
                isinstance(m, protocol.ErrorMsg) and m.code == "version_mismatch"
                for m in msgs
            )
        server.request_stop()
        await asyncio.wait_for(task, 5)

    asyncio.run(run())
