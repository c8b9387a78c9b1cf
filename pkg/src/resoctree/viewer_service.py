"""Socket-facing session protocol for interactive viewers.

One WebSocket connection at /session owns one rendering session. Incoming
JSON messages mutate viewing state; after each state change the server steps
the render/download loop until the image converges (bounded per update),
streaming a PNG frame plus a stats message per step.

Protocol (client -> server):
    {"type": "set_camera", "position": [x,y,z], "target": [x,y,z],
     "up": [x,y,z], "fov": 45}
    {"type": "set_channels", "channels": [
        {"slot": 0, "channel": 0, "tf": [[scalar, [r,g,b,a]], ...],
         "levelRange": [lo, hi]}, ...]}
    {"type": "set_config", "imageDims": [w,h], "baseStep": s,
     "maxRequests": n}

Server -> client:
    {"type": "frame", "frameId": n, "pngBytes": "<base64 PNG>"}
    {"type": "stats", "frameId": n, "requests": n, "residentBricks": n,
     "residentBytes": n, "converged": bool, "renderMs": ms}
    {"type": "error", "message": "..."}
"""

import base64
from dataclasses import replace
from pathlib import Path

from .camera import Camera
from .engine import EngineConfig
from .render import ChannelSettings, RenderConfig
from .service import DatasetStore, LocalTransport
from .session import Session, image_to_png_bytes
from .transfer import TransferFunction, grayscale_ramp_tf


class ProtocolError(ValueError):
    pass


def parse_tf(points) -> TransferFunction:
    try:
        parsed = tuple((float(x), tuple(float(v) for v in rgba))
                       for x, rgba in points)
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed transfer function: {exc}") from exc
    return TransferFunction(points=parsed)


def parse_channels(spec, engine_config: EngineConfig
                   ) -> tuple[list[ChannelSettings], dict[int, int]]:
    channels = []
    mapping = {}
    for entry in spec:
        slot = int(entry["slot"])
        lo, hi = entry.get("levelRange", (0, 15))
        channels.append(ChannelSettings(slot=slot,
                                        tf=parse_tf(entry["tf"]),
                                        level_range=(int(lo), int(hi))))
        if "channel" in entry:
            mapping[slot] = int(entry["channel"])
    return channels, mapping


def parse_camera(msg) -> Camera:
    try:
        return Camera(position=tuple(float(v) for v in msg["position"]),
                      target=tuple(float(v) for v in msg.get("target",
                                                             (0.5, 0.5, 0.5))),
                      up=tuple(float(v) for v in msg.get("up", (0.0, 1.0, 0.0))),
                      fov_deg=float(msg.get("fov", 45.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed camera: {exc}") from exc


class SessionDriver:
    """Protocol state machine; transport-agnostic so tests can drive it
    without a network."""

    def __init__(self, transport, engine_config: EngineConfig,
                 render_config: RenderConfig,
                 channels: list[ChannelSettings] | None = None,
                 max_frames_per_update: int = 50):
        if channels is None:
            channels = [ChannelSettings(slot=0, tf=grayscale_ramp_tf(1.0))]
        self.session = Session(transport, engine_config, render_config,
                               channels)
        self.camera: Camera | None = None
        self.max_frames = max_frames_per_update

    def handle(self, msg: dict) -> list[dict]:
        """Apply one message; returns the outgoing messages it produced."""
        if not isinstance(msg, dict) or "type" not in msg:
            return [{"type": "error", "message": "message needs a type"}]
        try:
            mtype = msg["type"]
            if mtype == "set_camera":
                self.camera = parse_camera(msg)
            elif mtype == "set_channels":
                channels, mapping = parse_channels(msg["channels"],
                                                   self.session.engine.config)
                for slot, channel in mapping.items():
                    if self.session.engine.paging.channel_mapping[slot] != channel:
                        self.session.swap_channel(slot, channel)
                self.session.set_channels(channels)
            elif mtype == "set_config":
                cfg = self.session.render_config
                if "imageDims" in msg:
                    cfg = replace(cfg, image_dims=tuple(
                        int(v) for v in msg["imageDims"]))
                if "baseStep" in msg:
                    cfg = replace(cfg, base_step=float(msg["baseStep"]))
                if "maxRequests" in msg:
                    cfg = replace(cfg,
                                  max_requests_per_frame=int(msg["maxRequests"]))
                self.session.set_render_config(cfg)
            else:
                return [{"type": "error",
                         "message": f"unknown message type {mtype!r}"}]
        except (ProtocolError, KeyError, TypeError, ValueError) as exc:
            return [{"type": "error", "message": str(exc)}]
        return self.render_until_converged()

    def render_until_converged(self) -> list[dict]:
        if self.camera is None:
            return []
        out = []
        for _ in range(self.max_frames):
            rec = self.session.step_frame(self.camera)
            png = image_to_png_bytes(rec.output.image)
            out.append({"type": "frame", "frameId": rec.frame_id,
                        "pngBytes": base64.b64encode(png).decode("ascii")})
            ws = self.session.working_set()
            out.append({"type": "stats", "frameId": rec.frame_id,
                        "requests": rec.output.stats.requests_issued,
                        "residentBricks": ws["resident_bricks"],
                        "residentBytes": ws["resident_bytes"],
                        "converged": self.session.converged,
                        "renderMs": rec.output.stats.render_ms})
            if self.session.converged:
                break
        return out

    def close(self):
        self.session.close()


def create_viewer_app(data_dir: str,
                      engine_config: EngineConfig | None = None,
                      render_config: RenderConfig | None = None,
                      static_dir: str | None = None,
                      max_frames_per_update: int = 50):
    import json

    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    from starlette.concurrency import run_in_threadpool

    store = DatasetStore(data_dir)
    engine_config = engine_config or EngineConfig()
    render_config = render_config or RenderConfig(image_dims=(256, 256))
    app = FastAPI(title="volume viewer")

    @app.websocket("/session")
    async def session_socket(ws: WebSocket):
        await ws.accept()
        driver = SessionDriver(LocalTransport(store), engine_config,
                               render_config,
                               max_frames_per_update=max_frames_per_update)
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps(
                        {"type": "error", "message": "invalid JSON"}))
                    continue
                replies = await run_in_threadpool(driver.handle, msg)
                for reply in replies:
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            driver.close()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="viewer")
    return app
