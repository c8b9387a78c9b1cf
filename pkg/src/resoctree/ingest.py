"""Convert dense volumes into the bricked multi-resolution multi-channel layout.

Pipeline per channel: range-normalize to u8, build the level pyramid by box
filtering, cut each level into fixed-size bricks (edge bricks padded by edge
replication), LZ4-compress each brick to its own file. The manifest is
written last, after all bricks exist.
"""

from __future__ import annotations

import concurrent.futures as cf
import os

import numpy as np

from . import lz4io
from .manifest import (DEFAULT_PATH_PATTERN, ManifestError, LevelDesc,
                       VolumeManifest, plan_levels)

_DTYPES = {"u8": np.uint8, "u16": np.uint16, "u32": np.uint32, "f32": np.float32}


class IngestError(RuntimeError):
    pass


def normalize_to_u8(raw: np.ndarray) -> np.ndarray:
    """Range-normalize one channel to u8: min -> 0, max -> 255."""
    data = raw.astype(np.float64)
    lo = data.min()
    hi = data.max()
    if hi == lo:
        return np.zeros(raw.shape, dtype=np.uint8)
    scaled = (data - lo) * (255.0 / (hi - lo))
    return np.floor(scaled + 0.5).clip(0, 255).astype(np.uint8)


def downsample_box(level: np.ndarray, factors: tuple[int, int, int]) -> np.ndarray:
    """Box-filter downsampling by per-axis factors in {1, 2}.

    Arrays are indexed [z, y, x]; factors are given as (fx, fy, fz).
    Odd extents are padded by edge replication before averaging, matching
    dims ceil-division.
    """
    fx, fy, fz = factors
    arr = level.astype(np.float64)
    for axis, f in ((0, fz), (1, fy), (2, fx)):
        if f == 1:
            continue
        n = arr.shape[axis]
        if n % 2 == 1:
            pad = [(0, 0)] * 3
            pad[axis] = (0, 1)
            arr = np.pad(arr, pad, mode="edge")
        shape = list(arr.shape)
        shape[axis] //= 2
        shape.insert(axis + 1, 2)
        arr = arr.reshape(shape).mean(axis=axis + 1)
    return np.floor(arr + 0.5).clip(0, 255).astype(np.uint8)


def build_pyramid(channel_u8: np.ndarray, levels: list[LevelDesc]) -> list[np.ndarray]:
    pyramid = [channel_u8]
    for lvl in levels[1:]:
        pyramid.append(downsample_box(pyramid[-1], lvl.downsample_from_prev))
    for lvl, arr in zip(levels, pyramid):
        assert arr.shape == (lvl.dims[2], lvl.dims[1], lvl.dims[0])
    return pyramid


def extract_brick(level_data: np.ndarray, brick_coord: tuple[int, int, int],
                  brick_size: tuple[int, int, int]) -> np.ndarray:
    """Cut one brick out of a level array (indexed [z, y, x]).

    Voxels outside the volume are replicated from the nearest in-volume
    voxel, so partial edge bricks carry valid scalar ranges.
    """
    bx, by, bz = brick_coord
    sx, sy, sz = brick_size
    dz, dy, dx = level_data.shape
    grid = (-(-dx // sx), -(-dy // sy), -(-dz // sz))
    if not (0 <= bx < grid[0] and 0 <= by < grid[1] and 0 <= bz < grid[2]):
        raise IngestError(f"brick coord {brick_coord} outside grid {grid}")
    x0, y0, z0 = bx * sx, by * sy, bz * sz
    part = level_data[z0:min(z0 + sz, dz), y0:min(y0 + sy, dy), x0:min(x0 + sx, dx)]
    pad = ((0, sz - part.shape[0]), (0, sy - part.shape[1]), (0, sx - part.shape[2]))
    if any(p[1] for p in pad):
        part = np.pad(part, pad, mode="edge")
    return np.ascontiguousarray(part)


def compress_brick(payload: np.ndarray) -> bytes:
    return lz4io.compress(np.ascontiguousarray(payload, dtype=np.uint8).tobytes())


def decompress_brick(data: bytes, brick_size: tuple[int, int, int]) -> np.ndarray:
    sx, sy, sz = brick_size
    raw = lz4io.decompress(data, expected_size=sx * sy * sz)
    return np.frombuffer(raw, dtype=np.uint8).reshape(sz, sy, sx)


def build_hierarchy(channels_raw: list[np.ndarray], brick_size: tuple[int, int, int],
                    num_levels: int, factors: tuple[int, int, int],
                    out_dir: str, name: str = "volume",
                    dtype_original: str | None = None,
                    workers: int = 4) -> VolumeManifest:
    """Write the full bricked hierarchy for all channels into out_dir.

    channels_raw holds one dense [z, y, x] array per channel, all with
    identical dims. Returns the manifest that was written.
    """
    if not channels_raw:
        raise IngestError("no channels given")
    shape = channels_raw[0].shape
    for ch in channels_raw:
        if ch.shape != shape:
            raise IngestError("all channels must share dims")
    if dtype_original is None:
        rev = {v: k for k, v in _DTYPES.items()}
        dtype_original = rev.get(channels_raw[0].dtype.type)
        if dtype_original is None:
            raise IngestError(f"unsupported dtype {channels_raw[0].dtype}")
    elif dtype_original not in _DTYPES:
        raise IngestError(f"unsupported dtype {dtype_original!r}")

    dims = (shape[2], shape[1], shape[0])
    levels = plan_levels(dims, brick_size, num_levels, factors)
    manifest = VolumeManifest(name=name, channel_count=len(channels_raw),
                              dtype_original=dtype_original, brick_size=brick_size,
                              levels=levels)

    os.makedirs(out_dir, exist_ok=True)

    def write_one(c, l, coord, level_data):
        payload = extract_brick(level_data, coord, brick_size)
        path = os.path.join(out_dir, manifest.brick_path(c, l, coord))
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as f:
            f.write(compress_brick(payload))

    jobs = []
    with cf.ThreadPoolExecutor(max_workers=workers) as pool:
        for c, raw in enumerate(channels_raw):
            pyramid = build_pyramid(normalize_to_u8(raw), levels)
            for l, lvl in enumerate(levels):
                gx, gy, gz = lvl.brick_grid_dims
                for bz in range(gz):
                    for by in range(gy):
                        for bx in range(gx):
                            jobs.append(pool.submit(write_one, c, l, (bx, by, bz),
                                                    pyramid[l]))
        for job in jobs:
            job.result()

    with open(os.path.join(out_dir, "manifest"), "w", encoding="utf-8") as f:
        f.write(manifest.to_json())
    return manifest


def load_raw_file(path: str, dims: tuple[int, int, int], dtype: str,
                  channels: int = 1) -> list[np.ndarray]:
    """Read a raw little-endian file holding `channels` dense volumes back to back."""
    if dtype not in _DTYPES:
        raise IngestError(f"unsupported dtype {dtype!r}")
    np_dtype = _DTYPES[dtype]
    count = dims[0] * dims[1] * dims[2] * channels
    data = np.fromfile(path, dtype=np_dtype)
    if data.size != count:
        raise IngestError(
            f"raw file holds {data.size} values, expected {count}")
    vol = data.reshape(channels, dims[2], dims[1], dims[0])
    return [vol[c] for c in range(channels)]
