"""Synthetic volumes used by benchmarks and tests."""

from __future__ import annotations

import numpy as np


def _coords(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ax = (np.arange(n, dtype=np.float64) + 0.5) / n
    return np.meshgrid(ax, ax, ax, indexing="ij")  # z, y, x


def constant_volume(n: int, value: int = 0) -> np.ndarray:
    return np.full((n, n, n), value, dtype=np.uint8)


def ramp_volume(n: int) -> np.ndarray:
    """Separable ramp; every voxel distinct enough to catch indexing bugs."""
    z, y, x = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    return ((x * 3 + y * 7 + z * 11) % 256).astype(np.uint8)


def sphere_volume(n: int, radius: float = 0.35, value: int = 200) -> np.ndarray:
    z, y, x = _coords(n)
    r = np.sqrt((x - 0.5) ** 2 + (y - 0.5) ** 2 + (z - 0.5) ** 2)
    vol = np.zeros((n, n, n), dtype=np.uint8)
    vol[r <= radius] = value
    # soft interior gradient so trilinear sampling has structure
    interior = r <= radius
    vol[interior] = (value - 80.0 * (r[interior] / radius)).astype(np.uint8)
    return vol


def shell_volume(n: int, radius: float = 0.38, thickness: float = 0.04,
                 value: int = 220) -> np.ndarray:
    """Sparse spherical shell: mostly empty space, a thin bright surface."""
    z, y, x = _coords(n)
    r = np.sqrt((x - 0.5) ** 2 + (y - 0.5) ** 2 + (z - 0.5) ** 2)
    vol = np.zeros((n, n, n), dtype=np.uint8)
    band = np.abs(r - radius) <= thickness
    vol[band] = value
    return vol


def vessel_volume(n: int, seed: int = 7, num_branches: int = 12,
                  value: int = 230) -> np.ndarray:
    """Sparse tangle of thin tubes, vaguely vascular."""
    rng = np.random.default_rng(seed)
    vol = np.zeros((n, n, n), dtype=np.uint8)
    zi, yi, xi = np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                             indexing="ij")
    pts = np.stack([xi, yi, zi], axis=-1).astype(np.float64) / n
    for _ in range(num_branches):
        a = rng.uniform(0.15, 0.85, size=3)
        b = rng.uniform(0.15, 0.85, size=3)
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            continue
        t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
        closest = a + t[..., None] * ab
        dist = np.linalg.norm(pts - closest, axis=-1)
        radius = rng.uniform(0.008, 0.02)
        vol[dist <= radius] = value
    return vol


def noise_volume(n: int, seed: int = 3) -> np.ndarray:
    """Dense volume: nothing skippable under a generic transfer function."""
    rng = np.random.default_rng(seed)
    return rng.integers(40, 255, size=(n, n, n), dtype=np.uint16).astype(np.uint8)


def two_constant_channels(n: int) -> list[np.ndarray]:
    return [constant_volume(n, 0), constant_volume(n, 255)]


def noise_floor(n: int, seed: int, hi: int = 15) -> np.ndarray:
    """Low-amplitude dense noise; sub-threshold under typical TFs."""
    rng = np.random.default_rng(seed)
    return rng.integers(1, hi + 1, size=(n, n, n)).astype(np.uint8)


def sparse_multichannel(n: int, channels: int = 4, seed: int = 11
                        ) -> list[np.ndarray]:
    """Sparse bright structures per channel over a dense sub-threshold
    noise floor, so structure-aware culling matters but whole-brick
    zero tests find nothing."""
    out = []
    for c in range(channels):
        if c % 2 == 0:
            fg = vessel_volume(n, seed=seed + c)
        else:
            fg = shell_volume(n, radius=0.30 + 0.05 * c)
        out.append(np.maximum(fg, noise_floor(n, seed=seed + 100 + c)))
    return out


def make(name: str, n: int, **kwargs) -> np.ndarray:
    makers = {
        "constant": constant_volume,
        "ramp": ramp_volume,
        "sphere": sphere_volume,
        "shell": shell_volume,
        "vessel": vessel_volume,
        "noise": noise_volume,
    }
    if name not in makers:
        raise ValueError(f"unknown synthetic volume {name!r}; "
                         f"choose from {sorted(makers)}")
    return makers[name](n, **kwargs)
