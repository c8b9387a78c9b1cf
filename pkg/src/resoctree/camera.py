"""Pinhole camera, ray generation, and scripted orbit poses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class CameraError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    target: tuple[float, float, float] = (0.5, 0.5, 0.5)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    fov_deg: float = 45.0

    def __post_init__(self):
        if not 0.0 < self.fov_deg < 180.0:
            raise CameraError(f"fov {self.fov_deg} outside (0, 180)")
        fwd = np.subtract(self.target, self.position)
        if np.linalg.norm(fwd) == 0.0:
            raise CameraError("camera position equals target")
        if np.linalg.norm(np.cross(fwd, self.up)) == 0.0:
            raise CameraError("up vector parallel to view direction")


def generate_rays(camera: Camera, width: int, height: int
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel ray origins and unit directions, scanline order, shape (h*w, 3)."""
    pos = np.array(camera.position, dtype=np.float64)
    fwd = np.array(camera.target, dtype=np.float64) - pos
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.array(camera.up, dtype=np.float64))
    right /= np.linalg.norm(right)
    up = np.cross(right, fwd)

    tan_half = math.tan(math.radians(camera.fov_deg) / 2.0)
    aspect = width / height
    js, is_ = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    u = ((is_ + 0.5) / width * 2.0 - 1.0) * tan_half * aspect
    v = (1.0 - (js + 0.5) / height * 2.0) * tan_half
    dirs = (fwd[None, None, :] + u[..., None] * right[None, None, :]
            + v[..., None] * up[None, None, :])
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    origins = np.broadcast_to(pos, dirs.reshape(-1, 3).shape).copy()
    return origins, np.ascontiguousarray(dirs.reshape(-1, 3))


def orbit_pose(angle_rad: float, radius: float = 2.2, elevation: float = 0.35,
               target: tuple[float, float, float] = (0.5, 0.5, 0.5),
               fov_deg: float = 45.0) -> Camera:
    """Camera on a y-axis orbit around the volume center."""
    cx, cy, cz = target
    pos = (cx + radius * math.cos(angle_rad),
           cy + elevation,
           cz + radius * math.sin(angle_rad))
    return Camera(position=pos, target=target, fov_deg=fov_deg)


def orbit_path(num_frames: int, radius: float = 2.2, elevation: float = 0.35,
               fov_deg: float = 45.0) -> list[Camera]:
    return [orbit_pose(2.0 * math.pi * i / num_frames, radius, elevation,
                       fov_deg=fov_deg)
            for i in range(num_frames)]
