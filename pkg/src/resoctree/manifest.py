"""Dataset manifest: channels, resolution levels, brick layout, compression.

The manifest is a single UTF-8 JSON document stored next to the brick files.
Level 0 is the finest resolution; each coarser level halves (or keeps) the
voxel count per axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

SUPPORTED_DTYPES = ("u8", "u16", "u32", "f32")
DEFAULT_PATH_PATTERN = "c{c}/l{l}/{x}_{y}_{z}.lz4"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class LevelDesc:
    dims: tuple[int, int, int]                 # voxels, (x, y, z)
    downsample_from_prev: tuple[int, int, int]  # per-axis factor, level 0 = (1,1,1)
    brick_grid_dims: tuple[int, int, int]       # bricks per axis


@dataclass
class VolumeManifest:
    name: str
    channel_count: int
    dtype_original: str
    brick_size: tuple[int, int, int]
    levels: list[LevelDesc] = field(default_factory=list)
    compression: str = "lz4"
    path_pattern: str = DEFAULT_PATH_PATTERN
    metadata_capable: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.channel_count < 1:
            raise ManifestError("channelCount must be >= 1")
        if self.dtype_original not in SUPPORTED_DTYPES:
            raise ManifestError(f"unsupported dtype {self.dtype_original!r}")
        if self.compression != "lz4":
            raise ManifestError("compression must be 'lz4'")
        for b in self.brick_size:
            if b < 2 or (b & (b - 1)) != 0:
                raise ManifestError("brick size must be a power of two >= 2 per axis")
        if not self.levels:
            raise ManifestError("at least one level required")
        prev = None
        for i, lvl in enumerate(self.levels):
            for a in range(3):
                if lvl.downsample_from_prev[a] not in (1, 2):
                    raise ManifestError("downsample factors must be 1 or 2")
                expected_grid = -(-lvl.dims[a] // self.brick_size[a])
                if lvl.brick_grid_dims[a] != expected_grid:
                    raise ManifestError(f"level {i}: brickGridDims mismatch")
                if lvl.brick_grid_dims[a] > 256:
                    raise ManifestError("brick grid exceeds 256 per axis")
            if i == 0:
                if lvl.downsample_from_prev != (1, 1, 1):
                    raise ManifestError("level 0 must use factors (1,1,1)")
            else:
                for a in range(3):
                    if lvl.dims[a] != -(-prev.dims[a] // lvl.downsample_from_prev[a]):
                        raise ManifestError(f"level {i}: dims inconsistent with factors")
                if math.prod(lvl.dims) >= math.prod(prev.dims):
                    raise ManifestError("levels must strictly decrease in voxel count")
            prev = lvl

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def brick_voxels(self) -> int:
        return math.prod(self.brick_size)

    def brick_path(self, channel: int, level: int, coord: tuple[int, int, int]) -> str:
        x, y, z = coord
        return self.path_pattern.format(c=channel, l=level, x=x, y=y, z=z)

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "channelCount": self.channel_count,
            "dtypeOriginal": self.dtype_original,
            "brickSize": list(self.brick_size),
            "compression": self.compression,
            "pathPattern": self.path_pattern,
            "metadataCapable": self.metadata_capable,
            "levels": [
                {
                    "dims": list(l.dims),
                    "downsampleFromPrev": list(l.downsample_from_prev),
                    "brickGridDims": list(l.brick_grid_dims),
                }
                for l in self.levels
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "VolumeManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ManifestError(f"malformed manifest: {e}") from e
        try:
            levels = [
                LevelDesc(
                    dims=tuple(l["dims"]),
                    downsample_from_prev=tuple(l["downsampleFromPrev"]),
                    brick_grid_dims=tuple(l["brickGridDims"]),
                )
                for l in doc["levels"]
            ]
            return cls(
                name=doc["name"],
                channel_count=doc["channelCount"],
                dtype_original=doc["dtypeOriginal"],
                brick_size=tuple(doc["brickSize"]),
                levels=levels,
                compression=doc.get("compression", "lz4"),
                path_pattern=doc.get("pathPattern", DEFAULT_PATH_PATTERN),
                metadata_capable=doc.get("metadataCapable", False),
            )
        except (KeyError, TypeError) as e:
            raise ManifestError(f"manifest missing field: {e}") from e


def plan_levels(dims: tuple[int, int, int], brick_size: tuple[int, int, int],
                num_levels: int, factors: tuple[int, int, int]) -> list[LevelDesc]:
    """Level pyramid for a volume of the given finest dims."""
    if num_levels < 1:
        raise ManifestError("numLevels must be >= 1")
    levels = []
    cur = tuple(dims)
    for i in range(num_levels):
        f = (1, 1, 1) if i == 0 else factors
        if i > 0:
            cur = tuple(-(-cur[a] // f[a]) for a in range(3))
        grid = tuple(-(-cur[a] // brick_size[a]) for a in range(3))
        levels.append(LevelDesc(dims=cur, downsample_from_prev=f, brick_grid_dims=grid))
    return levels
