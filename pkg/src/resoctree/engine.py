"""Rendering engine state: paging + residency octree + culling metadata.

The engine owns the mutable render state and applies all changes at frame
boundaries: brick arrivals, evictions, metadata arrivals, and channel swaps.
Dataset access goes through a `fetch`-style callback so the same engine works
against a local store or a remote brick service.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifest import VolumeManifest
from .octree import (NodeAddress, OctreeConfig, ResidencyOctree,
                     node_from_index)
from .paging import MAPPED, MultiChannelPaging, PagingConfig


class EngineError(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    octree_depth: int = 3
    cache_slots: tuple[int, int, int] = (8, 8, 8)
    channel_slots: int = 4
    homogeneity_eps: float = 0.0
    min_metadata_voxels: int = 1
    metadata_pad_voxels: int | None = None   # default: 1.5 * 2^(k-1) voxels

    def __post_init__(self):
        if self.channel_slots < 1:
            raise EngineError("need at least one channel slot")


class Engine:
    def __init__(self, manifest: VolumeManifest, config: EngineConfig):
        manifest.validate()
        self.manifest = manifest
        self.config = config
        k = len(manifest.levels)
        pconf = PagingConfig(brick_size=manifest.brick_size,
                             cache_slots=config.cache_slots,
                             m=config.channel_slots, k=k)
        self.paging = MultiChannelPaging(
            pconf,
            [lvl.dims for lvl in manifest.levels],
            [lvl.brick_grid_dims for lvl in manifest.levels])
        self.octree = ResidencyOctree(
            OctreeConfig(depth=config.octree_depth,
                         channel_slots=config.channel_slots,
                         homogeneity_eps=config.homogeneity_eps,
                         min_metadata_voxels=config.min_metadata_voxels),
            self.paging)
        self.frame = 0
        if config.metadata_pad_voxels is None:
            # a sample at any level l interpolates voxels whose level-0
            # footprint reaches 1.5 * 2^l voxels outward; bound the coarsest
            self.metadata_pad = -(-3 * (1 << (k - 1)) // 2)
        else:
            self.metadata_pad = config.metadata_pad_voxels

    # -- frame lifecycle ----------------------------------------------------

    def advance_frame(self) -> int:
        self.frame += 1
        return self.frame

    def note_sampled(self, required_mask: np.ndarray):
        """Once-per-frame LRU touch for every brick sampled this frame.

        The mask is indexed by page-table entry (the renderer's brick index
        space and the page tables share offsets)."""
        entries = np.flatnonzero(required_mask)
        for e in entries:
            if self.paging.pt_status[e] == MAPPED:
                lin = int(self.paging.pt_slot[e])
                self.paging.slot_last_used[lin] = self.frame

    # -- apply downloads ----------------------------------------------------

    def apply_brick(self, brick_id: int, payload: np.ndarray):
        _, evicted = self.paging.insert_brick(brick_id, payload, self.frame)
        if evicted is not None:
            self.octree.on_brick_evicted(evicted)
        self.octree.on_brick_inserted(brick_id)

    def apply_metadata(self, node_index: int, slot: int,
                       min_val: int, max_val: int):
        addr = node_from_index(node_index)
        if addr.d > self.octree.config.depth:
            raise EngineError(f"node index {node_index} beyond tree depth")
        self.octree.set_node_metadata(addr, slot, min_val, max_val)

    def swap_channel(self, channel_slot: int, dataset_channel: int):
        """Remap a slot to a different dataset channel.

        Frees the slot's cached bricks and drops all its octree state; the
        octree column starts over as INVALID with empty residency masks."""
        self.paging.set_channel_mapping(channel_slot, dataset_channel,
                                        self.manifest.channel_count)
        self.octree.invalidate_channel(channel_slot)

    # -- conservative culling metadata --------------------------------------

    def metadata_box(self, addr: NodeAddress) -> tuple[tuple[int, int, int],
                                                       tuple[int, int, int]]:
        """Level-0 voxel box: the node extent dilated so the min/max bounds
        every value any resolution level can contribute inside the node.

        Coarse voxels are rounded box averages of level-0 voxels, and
        trilinear sampling reaches at most one coarse voxel outward, so a
        dilation of 1.5x the coarsest voxel size bounds every level."""
        dims = self.manifest.levels[0].dims
        side = 1 << addr.d
        node = (addr.x, addr.y, addr.z)
        lo = []
        hi = []
        for a in range(3):
            v0 = (node[a] * dims[a]) // side - self.metadata_pad
            v1 = -((-(node[a] + 1) * dims[a]) // side) + self.metadata_pad
            lo.append(max(0, v0))
            hi.append(min(dims[a], v1))
        return tuple(lo), tuple(hi)

    def compute_metadata_local(self, addr: NodeAddress, slot: int,
                               volume: np.ndarray) -> tuple[int, int]:
        """Min/max over the dilated node box of a full level-0 volume."""
        lo, hi = self.metadata_box(addr)
        part = volume[lo[2]:hi[2], lo[1]:hi[1], lo[0]:hi[0]]
        if part.size == 0:
            return 0, 0
        return int(part.min()), int(part.max())

    def fill_metadata_from_volumes(self, volumes_by_slot: dict[int, np.ndarray]):
        """Populate every node's min/max for the given slots.

        Vectorized over each tree level with a dilation-window reduction;
        equivalent to calling compute_metadata_local per node."""
        for slot, vol in volumes_by_slot.items():
            for d in range(self.octree.config.depth + 1):
                side = 1 << d
                mins, maxs = _box_minmax_grid(vol, side, self.metadata_pad)
                base = _level_offset(d)
                w = (mins.astype(np.uint32) << 16) \
                    | (maxs.astype(np.uint32) << 24)
                masks = self.octree.words[base:base + side ** 3, slot] \
                    & np.uint32(0xFFFF)
                self.octree.words[base:base + side ** 3, slot] = masks | w.ravel()

    # -- bulk loading (tests, benchmarks, reference state) ------------------

    def prefill(self, fetch, slots: list[int] | None = None,
                levels: list[int] | None = None):
        """Insert every brick of the given slots/levels via fetch(slot, level,
        coord) -> payload. Raises if the cache cannot hold them all."""
        if slots is None:
            slots = list(range(self.config.channel_slots))
        if levels is None:
            levels = list(range(self.paging.config.k))
        need = 0
        for lev in levels:
            gx, gy, gz = (int(v) for v in self.paging.level_grids[lev])
            need += gx * gy * gz
        need *= len(slots)
        if need > self.paging.num_slots:
            raise EngineError(f"cache too small to prefill ({need} bricks, "
                              f"{self.paging.num_slots} slots)")
        for slot in slots:
            for lev in levels:
                gx, gy, gz = (int(v) for v in self.paging.level_grids[lev])
                for z in range(gz):
                    for y in range(gy):
                        for x in range(gx):
                            bid = self.paging.encode(slot, lev, (x, y, z))
                            self.apply_brick(bid, fetch(slot, lev, (x, y, z)))


def _level_offset(d: int) -> int:
    return ((1 << (3 * d)) - 1) // 7


def _box_minmax_grid(volume: np.ndarray, side: int, pad: int
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell min/max of `volume` over a side^3 grid of dilated boxes.

    Returns arrays of shape (side, side, side) indexed [z, y, x]."""
    nz, ny, nx = volume.shape
    mins = np.empty((side, side, side), dtype=np.uint8)
    maxs = np.empty((side, side, side), dtype=np.uint8)
    zb = _axis_bounds(nz, side, pad)
    yb = _axis_bounds(ny, side, pad)
    xb = _axis_bounds(nx, side, pad)
    for iz in range(side):
        z0, z1 = zb[iz]
        for iy in range(side):
            y0, y1 = yb[iy]
            for ix in range(side):
                x0, x1 = xb[ix]
                part = volume[z0:z1, y0:y1, x0:x1]
                if part.size == 0:
                    mins[iz, iy, ix] = 0
                    maxs[iz, iy, ix] = 0
                else:
                    mins[iz, iy, ix] = part.min()
                    maxs[iz, iy, ix] = part.max()
    return mins, maxs


def _axis_bounds(n: int, side: int, pad: int) -> list[tuple[int, int]]:
    out = []
    for i in range(side):
        v0 = (i * n) // side - pad
        v1 = -((-(i + 1) * n) // side) + pad
        out.append((max(0, v0), min(n, v1)))
    return out
