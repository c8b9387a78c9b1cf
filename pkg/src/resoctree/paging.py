"""Multi-channel multi-resolution page tables plus the shared LRU brick cache.

One page table exists per (channel slot, resolution level); all of them
reference a single cache of fixed-size bricks. Brick IDs pack channel slot,
level, and brick grid coordinate into 32 bits for compact cache-miss
reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNMAPPED = 0
MAPPED = 1
EMPTY = 2

_STATUS_NAMES = {UNMAPPED: "UNMAPPED", MAPPED: "MAPPED", EMPTY: "EMPTY"}


class PagingError(ValueError):
    pass


@dataclass(frozen=True)
class PagingConfig:
    brick_size: tuple[int, int, int]
    cache_slots: tuple[int, int, int]   # cache dims in bricks
    m: int                              # channel slots representable at once
    k: int                              # resolution levels per channel

    def __post_init__(self):
        if self.m * self.k > 256:
            raise PagingError("m*k must be <= 256 (8-bit page table ID)")
        if math.prod(self.cache_slots) < 1:
            raise PagingError("cache must have at least one slot")
        if self.m < 1 or self.k < 1:
            raise PagingError("m and k must be >= 1")


def encode_brick_id(channel_slot: int, level: int, coord: tuple[int, int, int],
                    k: int, m: int) -> int:
    x, y, z = coord
    if not (0 <= channel_slot < m and 0 <= level < k):
        raise PagingError(f"slot/level out of range: ({channel_slot},{level})")
    if not all(0 <= v < 256 for v in (x, y, z)):
        raise PagingError(f"brick coord out of 8-bit range: {coord}")
    page_table_id = channel_slot * k + level
    return (page_table_id << 24) | (z << 16) | (y << 8) | x


def decode_brick_id(brick_id: int, k: int) -> tuple[int, int, tuple[int, int, int]]:
    if not (0 <= brick_id < 1 << 32):
        raise PagingError(f"brick id out of 32-bit range: {brick_id}")
    x = brick_id & 0xFF
    y = (brick_id >> 8) & 0xFF
    z = (brick_id >> 16) & 0xFF
    page_table_id = (brick_id >> 24) & 0xFF
    return page_table_id // k, page_table_id % k, (x, y, z)


@dataclass(frozen=True)
class VirtualAddress:
    level: int
    channel_slot: int
    position: tuple[float, float, float]   # normalized, in [0,1]^3


@dataclass(frozen=True)
class Translation:
    status: int
    cache_slot: tuple[int, int, int] | None = None
    local_coord: tuple[float, float, float] | None = None  # voxel units in brick

    @property
    def status_name(self) -> str:
        return _STATUS_NAMES[self.status]


class MultiChannelPaging:
    """Page tables for m channel slots x k levels over one brick cache.

    Single-writer: all mutation happens on the frame thread between render
    passes; translate/sample are read-only.
    """

    def __init__(self, config: PagingConfig,
                 level_dims: list[tuple[int, int, int]],
                 level_grids: list[tuple[int, int, int]]):
        if len(level_dims) != config.k or len(level_grids) != config.k:
            raise PagingError("need dims and grid per level")
        self.config = config
        self.level_dims = np.array(level_dims, dtype=np.int32)
        self.level_grids = np.array(level_grids, dtype=np.int32)

        n_pt = config.m * config.k
        sizes = [int(np.prod(self.level_grids[pt % config.k])) for pt in range(n_pt)]
        self.pt_offsets = np.zeros(n_pt + 1, dtype=np.int64)
        np.cumsum(sizes, out=self.pt_offsets[1:])
        total = int(self.pt_offsets[-1])
        self.pt_status = np.zeros(total, dtype=np.int8)
        self.pt_slot = np.full(total, -1, dtype=np.int32)

        sx, sy, sz = config.brick_size
        self.num_slots = math.prod(config.cache_slots)
        self.cache = np.zeros((self.num_slots, sz, sy, sx), dtype=np.uint8)
        self.slot_brick = np.full(self.num_slots, -1, dtype=np.int64)
        self.slot_last_used = np.zeros(self.num_slots, dtype=np.int64)
        self._free = list(range(self.num_slots - 1, -1, -1))
        self.channel_mapping = list(range(config.m))

    # -- addressing ---------------------------------------------------------

    def _pt_index(self, channel_slot: int, level: int) -> int:
        if not (0 <= channel_slot < self.config.m and 0 <= level < self.config.k):
            raise PagingError(f"bad slot/level ({channel_slot},{level})")
        return channel_slot * self.config.k + level

    def _entry_index(self, channel_slot: int, level: int,
                     coord: tuple[int, int, int]) -> int:
        pt = self._pt_index(channel_slot, level)
        gx, gy, gz = (int(v) for v in self.level_grids[level])
        x, y, z = coord
        if not (0 <= x < gx and 0 <= y < gy and 0 <= z < gz):
            raise PagingError(f"brick coord {coord} outside grid {(gx, gy, gz)}")
        return int(self.pt_offsets[pt]) + (z * gy + y) * gx + x

    def slot_triple(self, linear: int) -> tuple[int, int, int]:
        cx, cy, _ = self.config.cache_slots
        return (linear % cx, (linear // cx) % cy, linear // (cx * cy))

    def slot_linear(self, triple: tuple[int, int, int]) -> int:
        cx, cy, cz = self.config.cache_slots
        x, y, z = triple
        if not (0 <= x < cx and 0 <= y < cy and 0 <= z < cz):
            raise PagingError(f"cache slot {triple} out of range")
        return (z * cy + y) * cx + x

    def brick_coord_of(self, level: int, position: tuple[float, float, float]
                       ) -> tuple[int, int, int]:
        dims = self.level_dims[level]
        grid = self.level_grids[level]
        out = []
        for a in range(3):
            c = int(position[a] * dims[a] // self.config.brick_size[a])
            out.append(min(max(c, 0), int(grid[a]) - 1))
        return tuple(out)

    def encode(self, channel_slot: int, level: int,
               coord: tuple[int, int, int]) -> int:
        self._entry_index(channel_slot, level, coord)  # validates against grid
        return encode_brick_id(channel_slot, level, coord,
                               self.config.k, self.config.m)

    def decode(self, brick_id: int) -> tuple[int, int, tuple[int, int, int]]:
        return decode_brick_id(brick_id, self.config.k)

    # -- lookup -------------------------------------------------------------

    def translate(self, addr: VirtualAddress) -> Translation:
        coord = self.brick_coord_of(addr.level, addr.position)
        idx = self._entry_index(addr.channel_slot, addr.level, coord)
        status = int(self.pt_status[idx])
        if status != MAPPED:
            return Translation(status=status)
        dims = self.level_dims[addr.level]
        local = tuple(
            float(addr.position[a] * dims[a]
                  - coord[a] * self.config.brick_size[a])
            for a in range(3))
        return Translation(status=MAPPED,
                           cache_slot=self.slot_triple(int(self.pt_slot[idx])),
                           local_coord=local)

    def resident_slot(self, brick_id: int) -> int | None:
        """Linear cache slot of a resident brick, else None."""
        slot, level, coord = self.decode(brick_id)
        idx = self._entry_index(slot, level, coord)
        if self.pt_status[idx] == MAPPED:
            return int(self.pt_slot[idx])
        return None

    # -- mutation -----------------------------------------------------------

    def insert_brick(self, brick_id: int, payload: np.ndarray, frame: int
                     ) -> tuple[tuple[int, int, int], int | None]:
        """Returns (cache slot triple, evicted brick id or None).

        Re-inserting a resident brick is a no-op returning the existing slot.
        """
        slot, level, coord = self.decode(brick_id)
        idx = self._entry_index(slot, level, coord)
        sx, sy, sz = self.config.brick_size
        if payload.shape != (sz, sy, sx):
            raise PagingError(f"payload shape {payload.shape} != brick size")
        if self.pt_status[idx] == MAPPED:
            return self.slot_triple(int(self.pt_slot[idx])), None

        evicted = None
        if self._free:
            lin = self._free.pop()
        else:
            occupied = np.flatnonzero(self.slot_brick >= 0)
            lin = int(occupied[np.argmin(self.slot_last_used[occupied])])
            evicted = int(self.slot_brick[lin])
            e_slot, e_level, e_coord = self.decode(evicted)
            e_idx = self._entry_index(e_slot, e_level, e_coord)
            self.pt_status[e_idx] = UNMAPPED
            self.pt_slot[e_idx] = -1

        self.cache[lin] = payload
        self.slot_brick[lin] = brick_id
        self.slot_last_used[lin] = frame
        self.pt_status[idx] = MAPPED
        self.pt_slot[idx] = lin
        return self.slot_triple(lin), evicted

    def mark_used(self, slot: tuple[int, int, int], frame: int):
        lin = self.slot_linear(slot)
        if self.slot_brick[lin] < 0:
            raise PagingError(f"slot {slot} is not occupied")
        if frame < self.slot_last_used[lin]:
            raise PagingError("frame counter must be monotone")
        self.slot_last_used[lin] = frame

    def mark_empty(self, brick_id: int):
        slot, level, coord = self.decode(brick_id)
        idx = self._entry_index(slot, level, coord)
        if self.pt_status[idx] == MAPPED:
            self._release_slot(int(self.pt_slot[idx]))
        self.pt_status[idx] = EMPTY
        self.pt_slot[idx] = -1

    def _release_slot(self, lin: int):
        self.slot_brick[lin] = -1
        self.slot_last_used[lin] = 0
        self._free.append(lin)

    def sample(self, slot: tuple[int, int, int],
               local_coord: tuple[float, float, float]) -> float:
        """Trilinear sample, coordinates clamped to the brick interior."""
        lin = self.slot_linear(slot)
        brick = self.cache[lin]
        sx, sy, sz = self.config.brick_size
        lx = min(max(local_coord[0] - 0.5, 0.0), sx - 1.0)
        ly = min(max(local_coord[1] - 0.5, 0.0), sy - 1.0)
        lz = min(max(local_coord[2] - 0.5, 0.0), sz - 1.0)
        x0, y0, z0 = int(lx), int(ly), int(lz)
        x1, y1, z1 = min(x0 + 1, sx - 1), min(y0 + 1, sy - 1), min(z0 + 1, sz - 1)
        fx, fy, fz = lx - x0, ly - y0, lz - z0

        def lerp(a, b, t):
            return a + (b - a) * t

        c00 = lerp(float(brick[z0, y0, x0]), float(brick[z0, y0, x1]), fx)
        c10 = lerp(float(brick[z0, y1, x0]), float(brick[z0, y1, x1]), fx)
        c01 = lerp(float(brick[z1, y0, x0]), float(brick[z1, y0, x1]), fx)
        c11 = lerp(float(brick[z1, y1, x0]), float(brick[z1, y1, x1]), fx)
        return lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)

    def set_channel_mapping(self, channel_slot: int, dataset_channel: int,
                            channel_count: int | None = None):
        """Remap a slot to another dataset channel.

        All k page tables of the slot reset to UNMAPPED and every cached
        brick of the slot is freed, even when remapping to the same channel.
        """
        if not 0 <= channel_slot < self.config.m:
            raise PagingError(f"channel slot {channel_slot} out of range")
        if channel_count is not None and not 0 <= dataset_channel < channel_count:
            raise PagingError(
                f"dataset channel {dataset_channel} >= n ({channel_count})")
        for level in range(self.config.k):
            pt = self._pt_index(channel_slot, level)
            lo, hi = int(self.pt_offsets[pt]), int(self.pt_offsets[pt + 1])
            self.pt_status[lo:hi] = UNMAPPED
            self.pt_slot[lo:hi] = -1
        for lin in np.flatnonzero(self.slot_brick >= 0):
            slot, _, _ = self.decode(int(self.slot_brick[lin]))
            if slot == channel_slot:
                self._release_slot(int(lin))
        self.channel_mapping[channel_slot] = dataset_channel

    # -- introspection ------------------------------------------------------

    def resident_brick_ids(self) -> list[int]:
        return [int(b) for b in self.slot_brick if b >= 0]

    def occupied_slot_count(self) -> int:
        return int((self.slot_brick >= 0).sum())

    def check_bijection(self):
        """MAPPED page entries <-> occupied cache slots must be a bijection."""
        mapped = {}
        for pt in range(self.config.m * self.config.k):
            lo, hi = int(self.pt_offsets[pt]), int(self.pt_offsets[pt + 1])
            for i in range(lo, hi):
                if self.pt_status[i] == MAPPED:
                    lin = int(self.pt_slot[i])
                    if lin in mapped.values():
                        raise AssertionError("two entries share a cache slot")
                    mapped[i] = lin
        occupied = set(int(i) for i in np.flatnonzero(self.slot_brick >= 0))
        if set(mapped.values()) != occupied:
            raise AssertionError("MAPPED entries and occupied slots differ")
        for entry_idx, lin in mapped.items():
            brick_id = int(self.slot_brick[lin])
            slot, level, coord = self.decode(brick_id)
            if self._entry_index(slot, level, coord) != entry_idx:
                raise AssertionError("resident brick does not decode to its entry")
