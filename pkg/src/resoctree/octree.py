"""Residency octree: a full pointerless octree over normalized volume space.

Nodes carry one 32-bit word per channel slot: a 16-bit bitmask of resolution
levels with at least one cache-resident brick overlapping the node, plus
8-bit min/max culling metadata. The subdivision depth is independent of the
resolution hierarchy; a brick maps to many nodes and vice versa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .paging import MAPPED, MultiChannelPaging

INVALID_WORD = np.uint32(0x00FF0000)  # min=255, max=0: impossible for valid data


class OctreeError(ValueError):
    pass


@dataclass(frozen=True)
class OctreeConfig:
    depth: int                      # subdivision levels below root
    channel_slots: int              # m, shared with the paging config
    homogeneity_eps: float = 0.0
    min_metadata_voxels: int = 1

    def __post_init__(self):
        if not 0 <= self.depth <= 15:
            raise OctreeError("depth must be in [0, 15]")
        if self.min_metadata_voxels < 1:
            raise OctreeError("minMetadataVoxels must be positive")
        if not 0.0 <= self.homogeneity_eps <= 255.0:
            raise OctreeError("homogeneity epsilon outside [0, 255]")


@dataclass(frozen=True)
class NodeAddress:
    d: int
    x: int
    y: int
    z: int

    def __post_init__(self):
        side = 1 << self.d
        if not (0 <= self.x < side and 0 <= self.y < side and 0 <= self.z < side):
            raise OctreeError(f"node coord outside level {self.d} grid")

    @property
    def index(self) -> int:
        return level_offset(self.d) + ((self.z << self.d) + self.y << self.d) + self.x

    @property
    def parent(self) -> "NodeAddress | None":
        if self.d == 0:
            return None
        return NodeAddress(self.d - 1, self.x >> 1, self.y >> 1, self.z >> 1)

    def children(self) -> list["NodeAddress"]:
        d = self.d + 1
        return [NodeAddress(d, 2 * self.x + i, 2 * self.y + j, 2 * self.z + k)
                for k in (0, 1) for j in (0, 1) for i in (0, 1)]


def level_offset(d: int) -> int:
    return ((1 << (3 * d)) - 1) // 7


def total_nodes(depth: int) -> int:
    return ((1 << (3 * (depth + 1))) - 1) // 7


def node_from_index(index: int) -> NodeAddress:
    """Inverse of NodeAddress.index."""
    if index < 0:
        raise OctreeError(f"negative node index {index}")
    d = 0
    while level_offset(d + 1) <= index:
        d += 1
    rem = index - level_offset(d)
    side = 1 << d
    x = rem & (side - 1)
    y = (rem >> d) & (side - 1)
    z = rem >> (2 * d)
    return NodeAddress(d, x, y, z)


def node_extent(addr: NodeAddress) -> tuple[tuple[float, float, float],
                                            tuple[float, float, float]]:
    s = 1.0 / (1 << addr.d)
    return ((addr.x * s, addr.y * s, addr.z * s),
            ((addr.x + 1) * s, (addr.y + 1) * s, (addr.z + 1) * s))


def brick_extent(level_dims: tuple[int, int, int], brick_size: tuple[int, int, int],
                 coord: tuple[int, int, int]) -> tuple[tuple, tuple]:
    """Normalized spatial extent of a brick, as exact Fractions."""
    lo = tuple(Fraction(coord[a] * brick_size[a], level_dims[a]) for a in range(3))
    hi = tuple(Fraction((coord[a] + 1) * brick_size[a], level_dims[a])
               for a in range(3))
    return lo, hi


class ResidencyOctree:
    def __init__(self, config: OctreeConfig, paging: MultiChannelPaging):
        self.config = config
        self.paging = paging
        self.k = paging.config.k
        if config.channel_slots != paging.config.m:
            raise OctreeError("octree and paging disagree on channel slots")
        self.num_nodes = total_nodes(config.depth)
        self.words = np.full((self.num_nodes, config.channel_slots), INVALID_WORD,
                             dtype=np.uint32)
        # overlap geometry is fixed per dataset; memoize the exact-arithmetic
        # queries, which dominate update cost otherwise
        self._leaves_cache: dict[tuple[int, tuple], list[NodeAddress]] = {}
        self._bricks_cache: dict[tuple[NodeAddress, int], list] = {}

    # -- geometry -----------------------------------------------------------

    def overlapping_leaves(self, box_lo, box_hi) -> list[NodeAddress]:
        """Leaves whose open extent intersects the open box (Fraction or float).

        Touching exactly at a face does not count as overlapping.
        """
        D = self.config.depth
        side = 1 << D
        ranges = []
        for a in range(3):
            lo = Fraction(box_lo[a]) * side
            hi = Fraction(box_hi[a]) * side
            # leaf i overlaps iff i < hi and i+1 > lo
            i_lo = max(0, _ceil_open(lo))
            i_hi = min(side - 1, _floor_open(hi))
            if i_lo > i_hi:
                return []
            ranges.append((i_lo, i_hi))
        out = []
        for z in range(ranges[2][0], ranges[2][1] + 1):
            for y in range(ranges[1][0], ranges[1][1] + 1):
                for x in range(ranges[0][0], ranges[0][1] + 1):
                    out.append(NodeAddress(D, x, y, z))
        return out

    def leaves_for_brick(self, level: int, coord: tuple[int, int, int]
                         ) -> list[NodeAddress]:
        key = (level, coord)
        hit = self._leaves_cache.get(key)
        if hit is None:
            dims = tuple(int(v) for v in self.paging.level_dims[level])
            lo, hi = brick_extent(dims, self.paging.config.brick_size, coord)
            hit = self.overlapping_leaves(lo, hi)
            self._leaves_cache[key] = hit
        return hit

    def bricks_overlapping(self, addr: NodeAddress, level: int
                           ) -> list[tuple[int, int, int]]:
        """Brick coords of `level` whose open extent intersects the node's."""
        key = (addr, level)
        hit = self._bricks_cache.get(key)
        if hit is not None:
            return hit
        dims = self.paging.level_dims[level]
        grid = self.paging.level_grids[level]
        B = self.paging.config.brick_size
        side = 1 << addr.d
        node = (addr.x, addr.y, addr.z)
        ranges = []
        for a in range(3):
            # brick c overlaps iff c*B < node_hi*dims and (c+1)*B > node_lo*dims
            lo = Fraction(node[a] * int(dims[a]), side * B[a])
            hi = Fraction((node[a] + 1) * int(dims[a]), side * B[a])
            c_lo = max(0, _ceil_open(lo))
            c_hi = min(int(grid[a]) - 1, _floor_open(hi))
            if c_lo > c_hi:
                self._bricks_cache[key] = []
                return []
            ranges.append((c_lo, c_hi))
        hit = [(x, y, z)
               for z in range(ranges[2][0], ranges[2][1] + 1)
               for y in range(ranges[1][0], ranges[1][1] + 1)
               for x in range(ranges[0][0], ranges[0][1] + 1)]
        self._bricks_cache[key] = hit
        return hit

    # -- residency updates --------------------------------------------------

    def on_brick_inserted(self, brick_id: int):
        slot, level, coord = self.paging.decode(brick_id)
        bit = np.uint32(1 << level)
        changed = []
        for leaf in self.leaves_for_brick(level, coord):
            w = self.words[leaf.index, slot]
            if not w & bit:
                self.words[leaf.index, slot] = w | bit
                changed.append(leaf)
        self._propagate_up(changed, slot)

    def on_brick_evicted(self, brick_id: int):
        """Clear leaf bits no longer backed by any resident brick of the level.

        Must be called after the paging entry is already UNMAPPED.
        """
        slot, level, coord = self.paging.decode(brick_id)
        bit = np.uint32(1 << level)
        changed = []
        for leaf in self.leaves_for_brick(level, coord):
            w = self.words[leaf.index, slot]
            if not w & bit:
                continue
            if not self._leaf_backed(leaf, slot, level):
                self.words[leaf.index, slot] = w & ~bit
                changed.append(leaf)
        self._propagate_up(changed, slot)

    def _leaf_backed(self, leaf: NodeAddress, slot: int, level: int) -> bool:
        for coord in self.bricks_overlapping(leaf, level):
            idx = self.paging._entry_index(slot, level, coord)
            if self.paging.pt_status[idx] == MAPPED:
                return True
        return False

    def _propagate_up(self, changed: list[NodeAddress], slot: int):
        """Recompute ancestor masks as OR of children, stopping early where
        a parent's mask is unchanged."""
        frontier = {(n.x, n.y, n.z) for n in changed}
        d = self.config.depth
        while d > 0 and frontier:
            parents = {(x >> 1, y >> 1, z >> 1) for x, y, z in frontier}
            frontier = set()
            for px, py, pz in parents:
                parent = NodeAddress(d - 1, px, py, pz)
                mask = np.uint32(0)
                for child in parent.children():
                    mask |= self.words[child.index, slot] & np.uint32(0xFFFF)
                w = self.words[parent.index, slot]
                new = (w & np.uint32(0xFFFF0000)) | mask
                if new != w:
                    self.words[parent.index, slot] = new
                    frontier.add((px, py, pz))
            d -= 1

    # -- metadata -----------------------------------------------------------

    def residency_mask(self, addr: NodeAddress, slot: int) -> int:
        return int(self.words[addr.index, slot] & 0xFFFF)

    def metadata(self, addr: NodeAddress, slot: int) -> tuple[int, int] | None:
        w = int(self.words[addr.index, slot])
        mn, mx = (w >> 16) & 0xFF, (w >> 24) & 0xFF
        if mn == 255 and mx == 0:
            return None
        return mn, mx

    def is_valid(self, addr: NodeAddress, slot: int) -> bool:
        return self.metadata(addr, slot) is not None

    def set_node_metadata(self, addr: NodeAddress, slot: int,
                          min_val: int, max_val: int):
        if not (0 <= min_val <= max_val <= 255):
            raise OctreeError(f"need 0 <= min <= max <= 255, got ({min_val},{max_val})")
        w = int(self.words[addr.index, slot])
        self.words[addr.index, slot] = np.uint32(
            (w & 0xFFFF) | (min_val << 16) | (max_val << 24))

    def invalidate_channel(self, slot: int):
        """Mark the whole tree INVALID for a slot and clear its masks."""
        self.words[:, slot] = INVALID_WORD

    def compute_node_metadata_from_bricks(self, addr: NodeAddress, slot: int,
                                          fetch) -> tuple[int, int]:
        """Min/max over the node's extent at the coarsest level whose voxel
        footprint inside the extent reaches minMetadataVoxels.

        fetch(channel_slot, level, brick_coord) must return a decompressed
        payload array; it may raise to signal an unreachable server, in which
        case the node stays INVALID.
        """
        level = self.choose_metadata_level(addr)
        dims = tuple(int(v) for v in self.paging.level_dims[level])
        B = self.paging.config.brick_size
        vr = self._voxel_ranges(addr, level)
        mn, mx = 255, 0
        for coord in self.bricks_overlapping(addr, level):
            payload = fetch(slot, level, coord)
            x0 = max(vr[0][0], coord[0] * B[0]) - coord[0] * B[0]
            x1 = min(vr[0][1], (coord[0] + 1) * B[0], dims[0]) - coord[0] * B[0]
            y0 = max(vr[1][0], coord[1] * B[1]) - coord[1] * B[1]
            y1 = min(vr[1][1], (coord[1] + 1) * B[1], dims[1]) - coord[1] * B[1]
            z0 = max(vr[2][0], coord[2] * B[2]) - coord[2] * B[2]
            z1 = min(vr[2][1], (coord[2] + 1) * B[2], dims[2]) - coord[2] * B[2]
            if x0 >= x1 or y0 >= y1 or z0 >= z1:
                continue
            part = payload[z0:z1, y0:y1, x0:x1]
            mn = min(mn, int(part.min()))
            mx = max(mx, int(part.max()))
        if mn > mx:   # extent met no in-volume voxels; treat as zero
            mn = mx = 0
        return mn, mx

    def choose_metadata_level(self, addr: NodeAddress) -> int:
        """Coarsest level whose footprint in the node meets minMetadataVoxels."""
        for level in range(self.k - 1, -1, -1):
            count = 1
            for v0, v1 in self._voxel_ranges(addr, level):
                count *= max(0, v1 - v0)
            if count >= self.config.min_metadata_voxels:
                return level
        return 0

    def _voxel_ranges(self, addr: NodeAddress, level: int
                      ) -> list[tuple[int, int]]:
        """Half-open voxel index ranges of `level` overlapping the node extent."""
        dims = self.paging.level_dims[level]
        side = 1 << addr.d
        node = (addr.x, addr.y, addr.z)
        out = []
        for a in range(3):
            lo = Fraction(node[a] * int(dims[a]), side)
            hi = Fraction((node[a] + 1) * int(dims[a]), side)
            v0 = max(0, _ceil_open(lo))
            v1 = min(int(dims[a]), _floor_open(hi) + 1)
            out.append((v0, v1))
        return out

    # -- culling queries ----------------------------------------------------

    def is_empty(self, addr: NodeAddress, slots: list[int], tfs: dict) -> bool:
        """Empty iff every requested slot has valid metadata whose value range
        maps to zero opacity under that slot's transfer function."""
        for slot in slots:
            meta = self.metadata(addr, slot)
            if meta is None:
                return False
            if tfs[slot].interval_max_opacity(meta[0], meta[1]) != 0.0:
                return False
        return True

    def is_homogeneous(self, addr: NodeAddress, slots: list[int]) -> bool:
        for slot in slots:
            meta = self.metadata(addr, slot)
            if meta is None:
                return False
            if meta[1] - meta[0] > self.config.homogeneity_eps:
                return False
        return True

    # -- full-scan invariants ----------------------------------------------

    def check_mask_consistency(self):
        """Every non-leaf mask must equal the OR of its children's masks."""
        for d in range(self.config.depth):
            side = 1 << d
            for z in range(side):
                for y in range(side):
                    for x in range(side):
                        parent = NodeAddress(d, x, y, z)
                        for slot in range(self.config.channel_slots):
                            expect = 0
                            for child in parent.children():
                                expect |= self.residency_mask(child, slot)
                            got = self.residency_mask(parent, slot)
                            if got != expect:
                                raise AssertionError(
                                    f"node {parent} slot {slot}: mask {got:#x} != "
                                    f"OR(children) {expect:#x}")

    def check_leaf_ground_truth(self):
        """Leaf bit l set iff a resident brick of (slot, l) overlaps the leaf."""
        resident: dict[tuple[int, int], set] = {}
        for brick_id in self.paging.resident_brick_ids():
            slot, level, coord = self.paging.decode(brick_id)
            resident.setdefault((slot, level), set()).add(coord)
        D = self.config.depth
        side = 1 << D
        for z in range(side):
            for y in range(side):
                for x in range(side):
                    leaf = NodeAddress(D, x, y, z)
                    for slot in range(self.config.channel_slots):
                        mask = self.residency_mask(leaf, slot)
                        for level in range(self.k):
                            overlap = resident.get((slot, level), set())
                            truth = bool(overlap) and any(
                                c in overlap
                                for c in self.bricks_overlapping(leaf, level))
                            if truth != bool(mask & (1 << level)):
                                raise AssertionError(
                                    f"leaf {leaf} slot {slot} level {level}: "
                                    f"bit={bool(mask & (1 << level))}, truth={truth}")


def _ceil_open(v: Fraction) -> int:
    """Smallest integer i with i+1 > v: the first cell whose open interval
    extends past v."""
    return math.floor(v)


def _floor_open(v: Fraction) -> int:
    """Largest integer i with i < v."""
    return math.ceil(v) - 1
