"""Brick service: on-disk dataset store, HTTP app, and client transports.

Layout on disk (written by ingest):

    <dir>/manifest                      JSON
    <dir>/c{c}/l{l}/{x}_{y}_{z}.lz4     one compressed brick per file

The HTTP app serves compressed bricks plus, when enabled, min/max metadata
over arbitrary voxel boxes. A store mounted from plain files without
metadata support answers 501 for metadata so clients can fall back to
computing it from bricks themselves.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np

from .ingest import decompress_brick
from .lz4io import Lz4DecodeError
from .manifest import VolumeManifest


class BrickNotFound(KeyError):
    """The requested brick/channel/level does not exist in the dataset."""


class TransportError(RuntimeError):
    """The dataset exists but could not be reached or decoded."""


class DatasetStore:
    """Read access to an ingested dataset directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest"
        if not manifest_path.is_file():
            raise TransportError(f"no manifest at {manifest_path}")
        self.manifest = VolumeManifest.from_json(manifest_path.read_text())
        self.manifest.validate()
        self._levels: dict[tuple[int, int], np.ndarray] = {}
        self._lock = threading.Lock()

    def _check(self, c: int, l: int, coord: tuple[int, int, int] | None = None):
        if not 0 <= c < self.manifest.channel_count:
            raise BrickNotFound(f"channel {c} out of range")
        if not 0 <= l < len(self.manifest.levels):
            raise BrickNotFound(f"level {l} out of range")
        if coord is not None:
            grid = self.manifest.levels[l].brick_grid_dims
            if not all(0 <= coord[a] < grid[a] for a in range(3)):
                raise BrickNotFound(f"brick {coord} outside grid {grid}")

    def brick_path(self, c: int, l: int, coord: tuple[int, int, int]) -> Path:
        x, y, z = coord
        rel = self.manifest.path_pattern.format(c=c, l=l, x=x, y=y, z=z)
        return self.root / rel

    def brick_bytes(self, c: int, l: int, coord: tuple[int, int, int]) -> bytes:
        self._check(c, l, coord)
        path = self.brick_path(c, l, coord)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise BrickNotFound(f"missing brick file {path}") from None

    def brick(self, c: int, l: int, coord: tuple[int, int, int]) -> np.ndarray:
        try:
            return decompress_brick(self.brick_bytes(c, l, coord),
                                    self.manifest.brick_size)
        except Lz4DecodeError as exc:
            raise TransportError(f"corrupt brick {c}/{l}/{coord}: {exc}") from exc

    def level_array(self, c: int, l: int) -> np.ndarray:
        """Full voxel array of one level, assembled lazily from bricks."""
        key = (c, l)
        with self._lock:
            if key in self._levels:
                return self._levels[key]
        lvl = self.manifest.levels[l]
        nx, ny, nz = lvl.dims
        bx, by, bz = self.manifest.brick_size
        out = np.zeros((nz, ny, nx), dtype=np.uint8)
        gx, gy, gz = lvl.brick_grid_dims
        for z in range(gz):
            for y in range(gy):
                for x in range(gx):
                    payload = self.brick(c, l, (x, y, z))
                    z0, y0, x0 = z * bz, y * by, x * bx
                    z1, y1, x1 = min(z0 + bz, nz), min(y0 + by, ny), \
                        min(x0 + bx, nx)
                    out[z0:z1, y0:y1, x0:x1] = \
                        payload[:z1 - z0, :y1 - y0, :x1 - x0]
        with self._lock:
            self._levels[key] = out
        return out

    def region_min_max(self, c: int, l: int,
                       box: tuple[int, int, int, int, int, int]
                       ) -> tuple[int, int]:
        """Min/max over voxel box (x0,y0,z0,x1,y1,z1), half-open, clipped."""
        self._check(c, l)
        nx, ny, nz = self.manifest.levels[l].dims
        x0, y0, z0, x1, y1, z1 = box
        x0, y0, z0 = max(0, x0), max(0, y0), max(0, z0)
        x1, y1, z1 = min(nx, x1), min(ny, y1), min(nz, z1)
        if x0 >= x1 or y0 >= y1 or z0 >= z1:
            return 0, 0
        arr = self.level_array(c, l)
        part = arr[z0:z1, y0:y1, x0:x1]
        return int(part.min()), int(part.max())


def create_app(store: DatasetStore, metadata_enabled: bool = True):
    """FastAPI app exposing the dataset over HTTP."""
    from fastapi import FastAPI, Query, Response
    from fastapi.responses import JSONResponse

    app = FastAPI(title="brick service")

    @app.get("/manifest")
    def get_manifest():
        return JSONResponse(content=json.loads(store.manifest.to_json()))

    @app.get("/brick/{c}/{l}/{z}/{y}/{x}")
    def get_brick(c: str, l: str, z: str, y: str, x: str):
        try:
            ci, li = int(c), int(l)
            coord = (int(x), int(y), int(z))
        except ValueError:
            return JSONResponse(status_code=400,
                                content={"error": "non-integer brick address"})
        try:
            data = store.brick_bytes(ci, li, coord)
        except BrickNotFound as exc:
            return JSONResponse(status_code=404, content={"error": str(exc)})
        return Response(content=data, media_type="application/octet-stream")

    @app.get("/metadata")
    def get_metadata(c: str = Query(...), l: str = Query(...),
                     box: str = Query(...)):
        if not metadata_enabled:
            return JSONResponse(
                status_code=501,
                content={"error": "metadata not supported in plain-file mode"})
        try:
            ci, li = int(c), int(l)
            parts = [int(v) for v in box.split(",")]
            if len(parts) != 6:
                raise ValueError
        except ValueError:
            return JSONResponse(status_code=400,
                                content={"error": "malformed metadata query"})
        try:
            mn, mx = store.region_min_max(ci, li, tuple(parts))
        except BrickNotFound as exc:
            return JSONResponse(status_code=404, content={"error": str(exc)})
        return {"min": mn, "max": mx}

    return app


class LocalTransport:
    """Direct in-process access to a dataset store."""

    def __init__(self, store: DatasetStore):
        self.store = store

    @property
    def manifest(self) -> VolumeManifest:
        return self.store.manifest

    def fetch_brick(self, c: int, l: int, coord: tuple[int, int, int]
                    ) -> np.ndarray:
        return self.store.brick(c, l, coord)

    def fetch_metadata(self, c: int, l: int,
                       box: tuple[int, int, int, int, int, int]
                       ) -> tuple[int, int]:
        return self.store.region_min_max(c, l, box)

    def close(self):
        pass


class HttpTransport:
    """Brick service client over HTTP; one httpx client, thread-safe."""

    def __init__(self, base_url: str, timeout: float = 10.0, client=None):
        import httpx
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(base_url=self.base_url,
                                              timeout=timeout)
        self._manifest: VolumeManifest | None = None
        self.metadata_supported = True

    @property
    def manifest(self) -> VolumeManifest:
        if self._manifest is None:
            r = self._request("/manifest")
            self._manifest = VolumeManifest.from_json(r.text)
            self._manifest.validate()
        return self._manifest

    def _request(self, path: str, **kwargs):
        import httpx
        try:
            r = self._client.get(path, **kwargs)
        except httpx.HTTPError as exc:
            raise TransportError(f"GET {path}: {exc}") from exc
        if r.status_code == 404:
            raise BrickNotFound(f"GET {path}: {r.text}")
        if r.status_code == 501:
            self.metadata_supported = False
            raise TransportError(f"GET {path}: metadata unsupported")
        if r.status_code != 200:
            raise TransportError(f"GET {path}: HTTP {r.status_code}")
        return r

    def fetch_brick(self, c: int, l: int, coord: tuple[int, int, int]
                    ) -> np.ndarray:
        x, y, z = coord
        r = self._request(f"/brick/{c}/{l}/{z}/{y}/{x}")
        try:
            return decompress_brick(r.content, self.manifest.brick_size)
        except Lz4DecodeError as exc:
            raise TransportError(f"corrupt brick {c}/{l}/{coord}") from exc

    def fetch_metadata(self, c: int, l: int,
                       box: tuple[int, int, int, int, int, int]
                       ) -> tuple[int, int]:
        r = self._request("/metadata",
                          params={"c": c, "l": l,
                                  "box": ",".join(str(v) for v in box)})
        body = r.json()
        return int(body["min"]), int(body["max"])

    def close(self):
        self._client.close()
