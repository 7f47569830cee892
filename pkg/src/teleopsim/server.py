"""Live WebSocket bridge: realtime pipeline on one side, cockpit on the other.

A single client at a time connects to /ws and exchanges the binary
protocol from `teleopsim.protocol`:

* inbound:  HEAD_POSE (client head tracking)
* outbound: CLOUD_UPDATE on fresh scene data (decoupled), FRAME on fresh
  robot frames (direct), plus METRICS and PROPRIO at a steady cadence.

A second simultaneous connection is rejected with close code 1008; a
malformed or unknown message closes the connection with protocol error
close code 1002.  Clouds larger than `wire_points` are downsampled before
encoding; this only thins the wire, the server keeps rendering the full
cloud.
"""

from __future__ import annotations

import asyncio
import io
import logging
from contextlib import asynccontextmanager
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from PIL import Image

from . import protocol
from .cloud import downsample
from .pipeline import PipelineConfig, RealtimePipeline, resolve_scene
from .trajectories import make_trajectory

log = logging.getLogger("teleopsim.server")

CLOSE_PROTOCOL_ERROR = 1002
CLOSE_POLICY = 1008


@dataclass
class ServeOptions:
    scene: str = "open-table"
    wire_points: int = 60_000
    head_source: str | None = None  # scripted trajectory name, None = client-driven
    metrics_hz: float = 10.0


def make_app(config: PipelineConfig, options: ServeOptions | None = None) -> FastAPI:
    options = options or ServeOptions()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        head_fn = make_trajectory(options.head_source) if options.head_source else None
        cfg = config if config.clock == "realtime" else PipelineConfig(
            **{**_cfg_dict(config), "clock": "realtime"}
        )
        app.state.pipeline = RealtimePipeline(cfg, resolve_scene(options.scene), head_fn)
        app.state.pipeline.start()
        try:
            yield
        finally:
            app.state.pipeline.stop()

    app = FastAPI(title="teleopsim", lifespan=lifespan)
    app.state.options = options
    app.state.client_count = 0

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        if app.state.client_count >= 1:
            await ws.close(code=CLOSE_POLICY)
            return
        app.state.client_count += 1
        try:
            await _session(app, ws)
        finally:
            app.state.client_count -= 1

    @app.get("/healthz")
    def health():
        return {"ok": True}

    return app


def _cfg_dict(config: PipelineConfig) -> dict:
    from dataclasses import asdict

    return asdict(config)


async def _session(app: FastAPI, ws: WebSocket):
    pipeline: RealtimePipeline = app.state.pipeline
    options: ServeOptions = app.state.options

    async def receiver():
        while True:
            data = await ws.receive_bytes()
            try:
                msg = protocol.decode_message(data)
            except protocol.ProtocolError as e:
                log.warning("protocol error from client: %s", e)
                await ws.close(code=CLOSE_PROTOCOL_ERROR)
                return
            if isinstance(msg, protocol.HeadPoseMsg):
                pipeline.submit_head_pose(msg.pose)
            # other inbound types are tolerated but ignored

    async def sender():
        core = pipeline.core
        sent_scene_us = -1
        sent_frame_us = -1
        sent_metric_count = 0
        period = 1.0 / options.metrics_hz
        while True:
            await asyncio.sleep(period / 2.0)
            with core.lock:
                cloud = core.cloud
                scene_us = core.cloud_scene_us
                frame = core.direct_frame
                frame_stamp_us = core.direct_frame_stamp_us
                n_records = len(core.log.records)
                latest = core.log.records[-1] if n_records else None
                proprio_stamp = core.neck_state.time
                cam = core.camera_pose()
                body = core.body
            if core.config.mode == "decoupled" and scene_us != sent_scene_us and len(cloud):
                wire = downsample(cloud, options.wire_points) if len(cloud) > options.wire_points else cloud
                await ws.send_bytes(
                    protocol.encode_cloud_update(scene_us / 1e6, wire.positions, wire.colors)
                )
                sent_scene_us = scene_us
            if core.config.mode == "direct" and frame is not None:
                cap_us = round(frame.capture_time * 1e6)
                if cap_us != sent_frame_us:
                    buf = io.BytesIO()
                    Image.fromarray(frame.rgb).save(buf, format="PNG")
                    await ws.send_bytes(
                        protocol.encode_frame(
                            frame_stamp_us / 1e6,
                            frame.capture_time,
                            frame.rgb.shape[1],
                            frame.rgb.shape[0],
                            buf.getvalue(),
                        )
                    )
                    sent_frame_us = cap_us
            if latest is not None and n_records != sent_metric_count:
                from dataclasses import asdict

                await ws.send_bytes(protocol.encode_metrics(asdict(latest)))
                sent_metric_count = n_records
            vals = np.concatenate(
                [
                    cam.to_array(),
                    body.left.to_array(),
                    body.right.to_array(),
                    [body.width_left, body.width_right],
                ]
            )
            await ws.send_bytes(protocol.encode_proprio(proprio_stamp, vals))

    recv_task = asyncio.create_task(receiver())
    send_task = asyncio.create_task(sender())
    try:
        done, pending = await asyncio.wait(
            {recv_task, send_task}, return_when=asyncio.FIRST_COMPLETED
        )
        for t in pending:
            t.cancel()
        for t in done:
            exc = t.exception()
            if exc is not None and not isinstance(exc, (WebSocketDisconnect, asyncio.CancelledError)):
                raise exc
    except WebSocketDisconnect:
        pass
    finally:
        for t in (recv_task, send_task):
            if not t.done():
                t.cancel()


def serve(config: PipelineConfig, options: ServeOptions, port: int, host: str = "127.0.0.1") -> None:
    import uvicorn

    app = make_app(config, options)
    uvicorn.run(app, host=host, port=port, log_level="warning")
