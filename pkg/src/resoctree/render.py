"""Frame rendering: configuration, kernel packing, and render entry points.

Four entry points share one kernel code path (`kernels.raycast_frame`):

  render_frame            residency-octree renderer (the real one)
  render_reference        in-core oracle, no skipping or substitution
  render_pagetable_only   baseline using page tables alone
  render_classic_octree   baseline with a one-to-one node/brick octree

Pure-Python mirrors of the per-sample traversal and compositing live at the
bottom; unit tests trace them by hand and cross-check them against the kernel.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .camera import Camera, generate_rays
from .kernels import (MODE_CLASSIC, MODE_PAGETABLE, MODE_REFERENCE,
                      MODE_RESIDENCY)
from .octree import NodeAddress, ResidencyOctree, level_offset
from .paging import EMPTY, MAPPED, MultiChannelPaging, VirtualAddress
from .transfer import TransferFunction


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelSettings:
    """One active channel; list order is importance order (most important first)."""
    slot: int
    tf: TransferFunction
    level_range: tuple[int, int] = (0, 15)   # desired-resolution clamp

    def __post_init__(self):
        if self.level_range[0] > self.level_range[1]:
            raise RenderError(f"level range {self.level_range} inverted")


@dataclass(frozen=True)
class RenderConfig:
    image_dims: tuple[int, int] = (256, 256)
    base_step: float = 1.0 / 256.0
    lod_reference_distance: float = 1.0     # distance where level 1 begins
    early_term_alpha: float = 0.99
    max_requests_per_frame: int = 256
    traversal_start_level: int = 2
    homogeneity_eps: float = 0.0

    def __post_init__(self):
        if self.base_step <= 0.0:
            raise RenderError("base step must be positive")
        if self.lod_reference_distance <= 0.0:
            raise RenderError("lod reference distance must be positive")
        if not 0.0 < self.early_term_alpha <= 1.0:
            raise RenderError("early termination alpha outside (0, 1]")
        if self.max_requests_per_frame < 1:
            raise RenderError("request budget must be positive")
        if self.traversal_start_level < 0:
            raise RenderError("traversal start level must be >= 0")


@dataclass
class FrameStats:
    traversal_steps: int = 0
    samples_evaluated: int = 0
    samples_skipped: int = 0
    skip_violations: int = 0
    required_bricks: int = 0
    required_bytes: int = 0
    requests_issued: int = 0
    render_ms: float = 0.0


@dataclass
class FrameOutput:
    image: np.ndarray                       # (h, w, 4) float32
    brick_requests: list[int]               # packed 32-bit brick ids, in order
    metadata_requests: list[tuple[int, int]]  # (node linear index, channel slot)
    stats: FrameStats
    required_mask: np.ndarray = field(repr=False, default=None)
    level_histogram: np.ndarray = field(repr=False, default=None)
    pixel_required: np.ndarray = field(repr=False, default=None)


_DUMMY_U8_2D = np.zeros((1, 1), dtype=np.uint8)
_DUMMY_I8 = np.zeros(1, dtype=np.int8)
_DUMMY_I32 = np.zeros(1, dtype=np.int32)
_DUMMY_I64 = np.zeros(1, dtype=np.int64)
_DUMMY_CACHE = np.zeros((1, 1, 1, 1), dtype=np.uint8)
_DUMMY_WORDS = np.zeros((1, 1), dtype=np.uint32)


def _pack_channels(channels: list[ChannelSettings], k: int):
    if not channels:
        raise RenderError("need at least one active channel")
    n_ch = len(channels)
    npoints = max(len(c.tf.points) for c in channels)
    ch_slot = np.array([c.slot for c in channels], dtype=np.int64)
    ch_lo = np.array([max(0, min(c.level_range[0], k - 1)) for c in channels],
                     dtype=np.int64)
    ch_hi = np.array([max(0, min(c.level_range[1], k - 1)) for c in channels],
                     dtype=np.int64)
    tf_x = np.zeros((n_ch, npoints), dtype=np.float64)
    tf_rgba = np.zeros((n_ch, npoints, 4), dtype=np.float64)
    tf_np = np.zeros(n_ch, dtype=np.int64)
    tf_f = np.zeros((n_ch, 256), dtype=np.float64)
    tf_op = np.zeros((n_ch, 256), dtype=np.float64)
    for i, c in enumerate(channels):
        xs, rgba, n = c.tf.packed_points(npoints)
        tf_x[i] = xs
        tf_rgba[i] = rgba
        tf_np[i] = n
        tf_f[i], tf_op[i] = c.tf.support_table()
    return ch_slot, ch_lo, ch_hi, tf_x, tf_rgba, tf_np, tf_f, tf_op


def _run(mode: int,
         paging: MultiChannelPaging,
         channels: list[ChannelSettings],
         camera: Camera,
         config: RenderConfig,
         octree: ResidencyOctree | None = None,
         classic: "ClassicMetadata | None" = None,
         reference_paging: MultiChannelPaging | None = None) -> FrameOutput:
    k = paging.config.k
    m = paging.config.m
    ch_slot, ch_lo, ch_hi, tf_x, tf_rgba, tf_np, tf_f, tf_op = \
        _pack_channels(channels, k)

    w, h = config.image_dims
    origins, dirs = generate_rays(camera, w, h)
    npix = origins.shape[0]

    if octree is not None:
        depth = octree.config.depth
        words = octree.words
        lvl_off = np.array([level_offset(d) for d in range(depth + 1)],
                           dtype=np.int64)
        eps_h = octree.config.homogeneity_eps
        num_nodes = octree.num_nodes
    else:
        depth = 0
        words = _DUMMY_WORDS
        lvl_off = _DUMMY_I64
        eps_h = config.homogeneity_eps
        num_nodes = 1

    if classic is not None:
        cls_min, cls_max = classic.min_arr, classic.max_arr
        cls_depth = classic.depth
        cls_lvl_off = classic.lvl_off
    else:
        cls_min = cls_max = _DUMMY_U8_2D
        cls_depth = 0
        cls_lvl_off = _DUMMY_I64

    if reference_paging is not None:
        check = 1
        ref_status = reference_paging.pt_status
        ref_slot = reference_paging.pt_slot
        ref_cache = reference_paging.cache
    else:
        check = 0
        ref_status = _DUMMY_I8
        ref_slot = _DUMMY_I32
        ref_cache = _DUMMY_CACHE

    total_bricks = int(paging.pt_offsets[-1])
    cap_buf = max(4 * config.max_requests_per_frame, 1024)
    image = np.zeros((npix, 4), dtype=np.float32)
    brick_req = np.zeros(cap_buf, dtype=np.int64)
    brick_req_n = np.zeros(1, dtype=np.int64)
    meta_req = np.zeros(cap_buf, dtype=np.int64)
    meta_req_n = np.zeros(1, dtype=np.int64)
    seen_brick = np.zeros(total_bricks, dtype=np.uint8)
    seen_meta = np.zeros(num_nodes * m, dtype=np.uint8)
    required = np.zeros(total_bricks, dtype=np.uint8)
    pix_required = np.zeros(npix, dtype=np.int32)
    n_ch = len(channels)
    hist = np.zeros((n_ch, k), dtype=np.int64)
    counters = np.zeros(4, dtype=np.int64)

    start = time.perf_counter()
    kernels.raycast_frame(
        mode, origins, dirs,
        ch_slot, ch_lo, ch_hi, tf_x, tf_rgba, tf_np, tf_f, tf_op,
        config.base_step, config.lod_reference_distance,
        config.early_term_alpha, eps_h, config.traversal_start_level,
        depth, k, m,
        lvl_off, words,
        paging.level_dims, paging.level_grids,
        np.array(paging.config.brick_size, dtype=np.int32),
        paging.pt_offsets, paging.pt_status, paging.pt_slot, paging.cache,
        paging.pt_offsets,
        cls_min, cls_max, cls_depth, cls_lvl_off,
        check, ref_status, ref_slot, ref_cache,
        image,
        brick_req, brick_req_n, meta_req, meta_req_n,
        seen_brick, seen_meta, required, pix_required, hist, counters)
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    # one budget covers brick and metadata requests combined; bricks first
    budget = config.max_requests_per_frame
    bricks = [int(v) for v in brick_req[:int(brick_req_n[0])]][:budget]
    budget -= len(bricks)
    metas = [(int(v) // m, int(v) % m)
             for v in meta_req[:int(meta_req_n[0])]][:budget]

    sx, sy, sz = paging.config.brick_size
    stats = FrameStats(
        traversal_steps=int(counters[0]),
        samples_evaluated=int(counters[1]),
        samples_skipped=int(counters[2]),
        skip_violations=int(counters[3]),
        required_bricks=int(required.sum()),
        required_bytes=int(required.sum()) * sx * sy * sz,
        requests_issued=len(bricks) + len(metas),
        render_ms=elapsed_ms)
    return FrameOutput(image=image.reshape(h, w, 4),
                       brick_requests=bricks,
                       metadata_requests=metas,
                       stats=stats,
                       required_mask=required,
                       level_histogram=hist,
                       pixel_required=pix_required)


def render_frame(paging: MultiChannelPaging, octree: ResidencyOctree,
                 channels: list[ChannelSettings], camera: Camera,
                 config: RenderConfig,
                 reference_paging: MultiChannelPaging | None = None
                 ) -> FrameOutput:
    """Residency-octree renderer; pass reference paging to audit every skip."""
    return _run(MODE_RESIDENCY, paging, channels, camera, config,
                octree=octree, reference_paging=reference_paging)


def render_reference(paging: MultiChannelPaging,
                     channels: list[ChannelSettings], camera: Camera,
                     config: RenderConfig) -> FrameOutput:
    """Oracle: every sample translated and evaluated, no acceleration."""
    return _run(MODE_REFERENCE, paging, channels, camera, config)


def render_pagetable_only(paging: MultiChannelPaging,
                          channels: list[ChannelSettings], camera: Camera,
                          config: RenderConfig) -> FrameOutput:
    return _run(MODE_PAGETABLE, paging, channels, camera, config)


def render_classic_octree(paging: MultiChannelPaging,
                          classic: "ClassicMetadata",
                          channels: list[ChannelSettings], camera: Camera,
                          config: RenderConfig) -> FrameOutput:
    return _run(MODE_CLASSIC, paging, channels, camera, config,
                classic=classic)


# ---------------------------------------------------------------------------
# classic-octree baseline metadata
# ---------------------------------------------------------------------------

class ClassicMetadata:
    """Per-node min/max for the classic one-to-one node/brick octree.

    Node depth d corresponds to resolution level (depth - d); the brick grid
    at every level must be an equal power of two per axis, so each node owns
    exactly one brick. Metadata is reduced bottom-up from level-0 voxels.
    """

    def __init__(self, paging: MultiChannelPaging):
        k = paging.config.k
        self.depth = k - 1
        for lev in range(k):
            g = paging.level_grids[lev]
            want = 1 << (self.depth - lev)
            if not (g[0] == g[1] == g[2] == want):
                raise RenderError(
                    "classic octree needs power-of-two brick grids "
                    f"(level {lev} grid {tuple(int(v) for v in g)}, "
                    f"expected {want}^3)")
        self.paging = paging
        n_nodes = (8 ** k - 1) // 7
        m = paging.config.m
        self.min_arr = np.zeros((n_nodes, m), dtype=np.uint8)
        self.max_arr = np.full((n_nodes, m), 255, dtype=np.uint8)
        self.lvl_off = np.array([level_offset(d) for d in range(k)],
                                dtype=np.int64)

    def build_from_volume(self, slot: int, volume: np.ndarray):
        """Fill a slot's metadata column from its full-resolution volume."""
        g = 1 << self.depth
        nz, ny, nx = volume.shape
        if nz % g or ny % g or nx % g:
            raise RenderError("volume dims must divide the leaf node grid")
        v = volume.reshape(g, nz // g, g, ny // g, g, nx // g)
        mn = v.min(axis=(1, 3, 5))
        mx = v.max(axis=(1, 3, 5))
        for d in range(self.depth, -1, -1):
            off = int(self.lvl_off[d])
            side = 1 << d
            self.min_arr[off:off + side ** 3, slot] = mn.ravel()
            self.max_arr[off:off + side ** 3, slot] = mx.ravel()
            if d > 0:
                s = side // 2
                mn = mn.reshape(s, 2, s, 2, s, 2).min(axis=(1, 3, 5))
                mx = mx.reshape(s, 2, s, 2, s, 2).max(axis=(1, 3, 5))


# ---------------------------------------------------------------------------
# pure-Python mirrors of the kernel's per-sample logic (for contract tests)
# ---------------------------------------------------------------------------

def choose_resolution_level(t: float, t0: float, lo: int = 0, hi: int = 15
                            ) -> int:
    """Desired level from eye distance: doubles every octave past t0."""
    return int(kernels.lod_level(t, t0, lo, hi))


def choose_traversal_depth(step: float, max_depth: int) -> int:
    """Deepest node level whose edge still covers one sampling step."""
    return int(kernels.traversal_depth(step, max_depth))


def composite_sample(acc: tuple[float, float, float, float],
                     contributions: list[tuple[float, float, float, float]],
                     step_ratio: float
                     ) -> tuple[float, float, float, float]:
    """Front-to-back over-compositing of one multi-channel sample.

    Channel RGBA contributions intermix additively in color and
    multiplicatively in transparency before opacity correction.
    """
    src_r = src_g = src_b = 0.0
    trans = 1.0
    for r, g, b, a in contributions:
        src_r += r * a
        src_g += g * a
        src_b += b * a
        trans *= (1.0 - a)
    alpha = 1.0 - trans
    ar, ag, ab, aa = acc
    if alpha > 0.0:
        corr = 1.0 - (1.0 - alpha) ** step_ratio
        scale = corr / alpha
        wgt = 1.0 - aa
        ar += wgt * src_r * scale
        ag += wgt * src_g * scale
        ab += wgt * src_b * scale
        aa += wgt * corr
    return (ar, ag, ab, aa)


def get_alternative_brick(octree: ResidencyOctree, paging: MultiChannelPaging,
                          slot: int, desired_level: int,
                          node: NodeAddress,
                          position: tuple[float, float, float]
                          ) -> tuple[int, tuple[int, int, int]] | None:
    """Nearest-resolution resident brick covering `position`, per the node's
    residency mask; coarser levels win ties. None when nothing is resident."""
    mask = octree.residency_mask(node, slot)
    k = paging.config.k
    for delta in range(1, k):
        for cand in (desired_level + delta, desired_level - delta):
            if not 0 <= cand < k or not (mask >> cand) & 1:
                continue
            coord = paging.brick_coord_of(cand, position)
            idx = paging._entry_index(slot, cand, coord)
            if paging.pt_status[idx] == MAPPED:
                return cand, coord
    return None


@dataclass
class ChannelOutcome:
    kind: str                    # "zero" | "const" | "sample" | "miss"
    value: float | None = None
    level: int | None = None
    coord: tuple[int, int, int] | None = None
    resolved_depth: int | None = None


@dataclass
class SampleResolution:
    outcomes: list[ChannelOutcome]
    end_depth: int
    skippable: bool
    skip_node: NodeAddress | None
    brick_requests: list[int]
    metadata_requests: list[tuple[NodeAddress, int]]
    steps: int


def traverse_sample(octree: ResidencyOctree, paging: MultiChannelPaging,
                    channels: list[ChannelSettings],
                    position: tuple[float, float, float],
                    desired_levels: list[int],
                    traversal_depth_limit: int,
                    start_depth: int) -> SampleResolution:
    """One multi-channel cursor descent, mirroring the kernel sample resolve.

    All channels share a single walk: the cursor only ever deepens, and each
    channel leaves the walk as soon as its node proves empty, homogeneous, or
    unmapped, or once the depth limit forces a brick fetch.
    """
    px, py, pz = (min(max(v, 0.0), 1.0 - 1e-9) for v in position)
    d = min(start_depth, traversal_depth_limit)
    d = max(d, 0)
    outcomes: list[ChannelOutcome] = []
    brick_reqs: list[int] = []
    meta_reqs: list[tuple[NodeAddress, int]] = []
    steps = 0
    node = None
    ci = 0
    all_skippable = True
    while ci < len(channels):
        side = 1 << d
        node = NodeAddress(d, min(int(px * side), side - 1),
                           min(int(py * side), side - 1),
                           min(int(pz * side), side - 1))
        steps += 1
        ch = channels[ci]
        meta = octree.metadata(node, ch.slot)
        if meta is None:
            if (node, ch.slot) not in meta_reqs:
                meta_reqs.append((node, ch.slot))
        else:
            mn, mx = meta
            if ch.tf.interval_is_empty(mn, mx):
                outcomes.append(ChannelOutcome("zero", resolved_depth=d))
                ci += 1
                continue
            if mx - mn <= octree.config.homogeneity_eps:
                outcomes.append(ChannelOutcome("const", value=float(mn),
                                               resolved_depth=d))
                ci += 1
                continue
        mask = octree.residency_mask(node, ch.slot)
        if mask == 0:
            lev = desired_levels[ci]
            coord = paging.brick_coord_of(lev, (px, py, pz))
            brick_reqs.append(paging.encode(ch.slot, lev, coord))
            outcomes.append(ChannelOutcome("miss", resolved_depth=d))
            ci += 1
            continue
        if d < traversal_depth_limit:
            d += 1
            continue
        lev = desired_levels[ci]
        coord = paging.brick_coord_of(lev, (px, py, pz))
        idx = paging._entry_index(ch.slot, lev, coord)
        if paging.pt_status[idx] == MAPPED:
            outcomes.append(ChannelOutcome("sample", level=lev, coord=coord,
                                           resolved_depth=d))
            all_skippable = False
        else:
            brick_reqs.append(paging.encode(ch.slot, lev, coord))
            alt = get_alternative_brick(octree, paging, ch.slot, lev, node,
                                        (px, py, pz))
            if alt is not None:
                outcomes.append(ChannelOutcome("sample", level=alt[0],
                                               coord=alt[1], resolved_depth=d))
            else:
                outcomes.append(ChannelOutcome("miss", resolved_depth=d))
            all_skippable = False
        ci += 1
    return SampleResolution(outcomes=outcomes, end_depth=d,
                            skippable=all_skippable,
                            skip_node=node if all_skippable else None,
                            brick_requests=brick_reqs,
                            metadata_requests=meta_reqs,
                            steps=steps)
