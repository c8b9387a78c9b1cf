"""Out-of-core ray-guided multi-volume renderer with a residency octree."""

from .camera import Camera, generate_rays, orbit_path, orbit_pose
from .engine import Engine, EngineConfig
from .manifest import LevelDesc, VolumeManifest, plan_levels
from .octree import NodeAddress, OctreeConfig, ResidencyOctree
from .paging import (MultiChannelPaging, PagingConfig, VirtualAddress,
                     decode_brick_id, encode_brick_id)
from .render import (ChannelSettings, ClassicMetadata, FrameOutput,
                     RenderConfig, render_classic_octree, render_frame,
                     render_pagetable_only, render_reference)
from .session import Session
from .transfer import TransferFunction

__all__ = [
    "Camera", "generate_rays", "orbit_path", "orbit_pose",
    "Engine", "EngineConfig",
    "LevelDesc", "VolumeManifest", "plan_levels",
    "NodeAddress", "OctreeConfig", "ResidencyOctree",
    "MultiChannelPaging", "PagingConfig", "VirtualAddress",
    "decode_brick_id", "encode_brick_id",
    "ChannelSettings", "ClassicMetadata", "FrameOutput", "RenderConfig",
    "render_classic_octree", "render_frame", "render_pagetable_only",
    "render_reference",
    "Session", "TransferFunction",
]

__version__ = "0.1.0"
