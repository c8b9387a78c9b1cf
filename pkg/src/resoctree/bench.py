"""Benchmarks: orbit runs comparing the residency renderer to baselines.

All methods render the same orbit with everything resident so the measured
quantity is the per-frame working set (bricks the method actually needs) and
traversal work, not download scheduling noise.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .camera import orbit_path
from .engine import Engine, EngineConfig
from .render import (ChannelSettings, ClassicMetadata, RenderConfig,
                     render_classic_octree, render_frame,
                     render_pagetable_only, render_reference)
from .service import DatasetStore

METHODS = ("residency", "classic", "pagetable")


@dataclass
class BenchRow:
    method: str
    frame: int
    ms: float
    required_bricks: int
    cache_bytes: int
    requests: int
    samples_evaluated: int
    samples_skipped: int
    traversal_steps: int


def _cache_slots_for(store: DatasetStore, n_slots_needed: int
                     ) -> tuple[int, int, int]:
    side = 1
    while side ** 3 < n_slots_needed:
        side += 1
    return (side, side, side)


def prepare_engine(store: DatasetStore, slots_to_channels: dict[int, int],
                   engine_config: EngineConfig) -> Engine:
    """Engine with every brick of the mapped channels resident and all
    culling metadata filled in."""
    engine = Engine(store.manifest, engine_config)
    for slot, channel in slots_to_channels.items():
        engine.paging.channel_mapping[slot] = channel
    fetch = lambda s, lev, c: store.brick(slots_to_channels[s], lev, c)
    engine.prefill(fetch, slots=sorted(slots_to_channels))
    engine.fill_metadata_from_volumes(
        {slot: store.level_array(ch, 0)
         for slot, ch in slots_to_channels.items()})
    return engine


def full_engine_config(store: DatasetStore, m: int, depth: int,
                       eps: float = 0.0) -> EngineConfig:
    total = m * sum(math.prod(lvl.brick_grid_dims)
                    for lvl in store.manifest.levels)
    return EngineConfig(octree_depth=depth,
                        cache_slots=_cache_slots_for(store, total),
                        channel_slots=m,
                        homogeneity_eps=eps)


def prepare_pagetable_engine(store: DatasetStore,
                             slots_to_channels: dict[int, int],
                             engine_config: EngineConfig) -> Engine:
    """Engine state as the page-table-only method would build it: every
    brick fetched once, all-zero payloads entered as EMPTY instead of
    occupying a cache slot."""
    engine = Engine(store.manifest, engine_config)
    for slot, channel in slots_to_channels.items():
        engine.paging.channel_mapping[slot] = channel
    for slot, channel in slots_to_channels.items():
        for lev in range(engine.paging.config.k):
            gx, gy, gz = (int(v) for v in engine.paging.level_grids[lev])
            for z in range(gz):
                for y in range(gy):
                    for x in range(gx):
                        payload = store.brick(channel, lev, (x, y, z))
                        bid = engine.paging.encode(slot, lev, (x, y, z))
                        if payload.max() == 0:
                            engine.paging.mark_empty(bid)
                        else:
                            engine.paging.insert_brick(bid, payload, 0)
    return engine


def run_orbit(store: DatasetStore,
              channels: list[ChannelSettings],
              slots_to_channels: dict[int, int],
              render_config: RenderConfig,
              engine_config: EngineConfig,
              num_frames: int = 36,
              methods: tuple[str, ...] = METHODS,
              orbit_radius: float = 2.2) -> list[BenchRow]:
    engine = prepare_engine(store, slots_to_channels, engine_config)
    engine_pt = None
    if "pagetable" in methods:
        engine_pt = prepare_pagetable_engine(store, slots_to_channels,
                                             engine_config)
    classic = None
    if "classic" in methods:
        classic = ClassicMetadata(engine.paging)
        for slot, ch in slots_to_channels.items():
            classic.build_from_volume(slot, store.level_array(ch, 0))

    rows: list[BenchRow] = []
    cameras = orbit_path(num_frames, radius=orbit_radius)
    for method in methods:
        for i, cam in enumerate(cameras):
            start = time.perf_counter()
            if method == "residency":
                out = render_frame(engine.paging, engine.octree, channels,
                                   cam, render_config)
            elif method == "classic":
                out = render_classic_octree(engine.paging, classic, channels,
                                            cam, render_config)
            elif method == "pagetable":
                out = render_pagetable_only(engine_pt.paging, channels, cam,
                                            render_config)
            elif method == "reference":
                out = render_reference(engine.paging, channels, cam,
                                       render_config)
            else:
                raise ValueError(f"unknown method {method!r}")
            ms = (time.perf_counter() - start) * 1000.0
            s = out.stats
            rows.append(BenchRow(method=method, frame=i, ms=ms,
                                 required_bricks=s.required_bricks,
                                 cache_bytes=s.required_bytes,
                                 requests=s.requests_issued,
                                 samples_evaluated=s.samples_evaluated,
                                 samples_skipped=s.samples_skipped,
                                 traversal_steps=s.traversal_steps))
    return rows


def summarize(rows: list[BenchRow]) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for method in sorted({r.method for r in rows}):
        sub = [r for r in rows if r.method == method]
        out[method] = {
            "frames": len(sub),
            "mean_required_bricks": float(np.mean([r.required_bricks
                                                   for r in sub])),
            "mean_cache_bytes": float(np.mean([r.cache_bytes for r in sub])),
            "mean_ms": float(np.mean([r.ms for r in sub])),
            "mean_steps": float(np.mean([r.traversal_steps for r in sub])),
            "mean_skipped": float(np.mean([r.samples_skipped for r in sub])),
        }
    return out


def write_csv(rows: list[BenchRow], path: str | Path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[f.name for f in
                                                BenchRow.__dataclass_fields__.values()])
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


def depth_sweep(store: DatasetStore, channels: list[ChannelSettings],
                slots_to_channels: dict[int, int],
                render_config: RenderConfig,
                depths: list[int], num_frames: int = 8) -> list[dict]:
    """Render quality/cost trade-off of the subdivision depth."""
    out = []
    for depth in depths:
        econf = full_engine_config(store, max(slots_to_channels) + 1, depth)
        rows = run_orbit(store, channels, slots_to_channels, render_config,
                         econf, num_frames=num_frames, methods=("residency",))
        summary = summarize(rows)["residency"]
        summary["depth"] = depth
        out.append(summary)
    return out
