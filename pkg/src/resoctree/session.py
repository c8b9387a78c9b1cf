"""Interactive rendering session: render, request, download, apply, repeat.

A session owns an engine and a transport. Each `step_frame` renders with the
current cache state, then downloads whatever the frame requested (bricks and
culling metadata, under one shared per-frame budget) and applies the arrivals
at the frame boundary, so the next frame sees a strictly better cache.

Convergence: two consecutive frames that issue no requests and produce
identical images.
"""

from __future__ import annotations

import hashlib
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .camera import Camera
from .engine import Engine, EngineConfig
from .octree import node_from_index
from .render import ChannelSettings, FrameOutput, RenderConfig, render_frame
from .service import BrickNotFound, TransportError


class SessionError(RuntimeError):
    pass


@dataclass
class FrameRecord:
    frame_id: int
    output: FrameOutput = field(repr=False)
    image_digest: str = ""
    bricks_applied: int = 0
    metadata_applied: int = 0
    requests_dropped: int = 0


class Session:
    def __init__(self, transport, engine_config: EngineConfig,
                 render_config: RenderConfig,
                 channels: list[ChannelSettings],
                 max_concurrency: int = 8,
                 retries: int = 3, backoff: float = 0.05):
        self.transport = transport
        self.engine = Engine(transport.manifest, engine_config)
        self.render_config = render_config
        self.channels = list(channels)
        for ch in self.channels:
            if not 0 <= ch.slot < engine_config.channel_slots:
                raise SessionError(f"channel slot {ch.slot} out of range")
        self.retries = retries
        self.backoff = backoff
        self._pool = ThreadPoolExecutor(max_workers=max_concurrency)
        self.history: list[FrameRecord] = []
        self._converged_streak = 0
        self._last_digest: str | None = None

    # -- frame loop ----------------------------------------------------------

    def step_frame(self, camera: Camera) -> FrameRecord:
        self.engine.advance_frame()
        out = render_frame(self.engine.paging, self.engine.octree,
                           self.channels, camera, self.render_config)
        self.engine.note_sampled(out.required_mask)

        rec = FrameRecord(frame_id=self.engine.frame, output=out)
        rec.image_digest = hashlib.sha256(out.image.tobytes()).hexdigest()

        brick_jobs = [self._pool.submit(self._fetch_brick, bid)
                      for bid in out.brick_requests]
        meta_jobs = [self._pool.submit(self._fetch_metadata, node_idx, slot)
                     for node_idx, slot in out.metadata_requests]
        for job in brick_jobs:
            result = job.result()
            if result is None:
                rec.requests_dropped += 1
            else:
                bid, payload = result
                self.engine.apply_brick(bid, payload)
                rec.bricks_applied += 1
        for job in meta_jobs:
            result = job.result()
            if result is None:
                rec.requests_dropped += 1
            else:
                node_idx, slot, mn, mx = result
                self.engine.apply_metadata(node_idx, slot, mn, mx)
                rec.metadata_applied += 1

        if out.stats.requests_issued == 0 and rec.image_digest == self._last_digest:
            self._converged_streak += 1
        elif out.stats.requests_issued == 0:
            self._converged_streak = 1
        else:
            self._converged_streak = 0
        self._last_digest = rec.image_digest
        self.history.append(rec)
        return rec

    @property
    def converged(self) -> bool:
        return self._converged_streak >= 2

    def run_until_converged(self, camera: Camera, max_frames: int = 50
                            ) -> list[FrameRecord]:
        recs = []
        for _ in range(max_frames):
            recs.append(self.step_frame(camera))
            if self.converged:
                break
        return recs

    # -- downloads -----------------------------------------------------------

    def _with_retries(self, fn, what: str):
        for attempt in range(self.retries):
            try:
                return fn()
            except BrickNotFound:
                return None   # permanently absent; drop
            except TransportError:
                if attempt + 1 == self.retries:
                    return None
                time.sleep(self.backoff * (2 ** attempt))
        return None

    def _fetch_brick(self, brick_id: int):
        slot, level, coord = self.engine.paging.decode(brick_id)
        channel = self.engine.paging.channel_mapping[slot]

        def go():
            return brick_id, self.transport.fetch_brick(channel, level, coord)
        return self._with_retries(go, f"brick {brick_id:#010x}")

    def _fetch_metadata(self, node_index: int, slot: int):
        addr = node_from_index(node_index)
        channel = self.engine.paging.channel_mapping[slot]
        lo, hi = self.engine.metadata_box(addr)
        box = (lo[0], lo[1], lo[2], hi[0], hi[1], hi[2])

        def go():
            try:
                mn, mx = self.transport.fetch_metadata(channel, 0, box)
            except TransportError:
                if getattr(self.transport, "metadata_supported", True):
                    raise
                # plain-file service: compute from bricks instead
                mn, mx = self.engine.octree.compute_node_metadata_from_bricks(
                    addr, slot,
                    lambda s, lev, c: self.transport.fetch_brick(
                        self.engine.paging.channel_mapping[s], lev, c))
            return node_index, slot, mn, mx
        return self._with_retries(go, f"metadata node {node_index}")

    # -- control -------------------------------------------------------------

    def swap_channel(self, channel_slot: int, dataset_channel: int):
        self.engine.swap_channel(channel_slot, dataset_channel)
        self._converged_streak = 0
        self._last_digest = None

    def set_channels(self, channels: list[ChannelSettings]):
        self.channels = list(channels)
        self._converged_streak = 0
        self._last_digest = None

    def set_render_config(self, config: RenderConfig):
        self.render_config = config
        self._converged_streak = 0
        self._last_digest = None

    def working_set(self) -> dict:
        paging = self.engine.paging
        sx, sy, sz = paging.config.brick_size
        occupied = paging.occupied_slot_count()
        return {"resident_bricks": occupied,
                "resident_bytes": occupied * sx * sy * sz}

    def close(self):
        self._pool.shutdown(wait=True)
        self.transport.close()


def image_to_png_bytes(image: np.ndarray) -> bytes:
    """Float RGBA (h, w, 4) in [0,1] to PNG bytes."""
    from PIL import Image

    u8 = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()
