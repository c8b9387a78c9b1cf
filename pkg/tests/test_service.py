import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from resoctree.manifest import VolumeManifest
from resoctree.service import (BrickNotFound, DatasetStore, HttpTransport,
                               LocalTransport, TransportError, create_app)


@pytest.fixture(scope="module")
def client64(store64):
    return TestClient(create_app(store64))


def http_transport(client):
    return HttpTransport("http://testserver", client=client)


# -- store ------------------------------------------------------------------

def test_store_missing_manifest(tmp_path):
    with pytest.raises(TransportError):
        DatasetStore(tmp_path)


def test_store_brick_and_bounds(store64, shell64_volume):
    from resoctree.ingest import normalize_to_u8
    vol = normalize_to_u8(shell64_volume)    # ingest rescales to full range
    brick = store64.brick(0, 0, (1, 1, 1))
    assert np.array_equal(brick, vol[16:32, 16:32, 16:32])
    with pytest.raises(BrickNotFound):
        store64.brick(0, 0, (4, 0, 0))
    with pytest.raises(BrickNotFound):
        store64.brick(1, 0, (0, 0, 0))
    with pytest.raises(BrickNotFound):
        store64.brick(0, 3, (0, 0, 0))


def test_store_corrupt_brick_raises(tmp_path, store64, shell64_volume):
    import shutil
    dst = tmp_path / "ds"
    shutil.copytree(store64.root, dst)
    path = DatasetStore(dst).brick_path(0, 0, (0, 0, 0))
    path.write_bytes(path.read_bytes()[:10])
    with pytest.raises(TransportError):
        DatasetStore(dst).brick(0, 0, (0, 0, 0))


def test_region_min_max_clipping(store64, shell64_volume):
    from resoctree.ingest import normalize_to_u8
    vol = normalize_to_u8(shell64_volume)
    full = store64.region_min_max(0, 0, (0, 0, 0, 64, 64, 64))
    assert full == (int(vol.min()), int(vol.max()))
    # dilated box clipped at the boundary
    assert store64.region_min_max(0, 0, (-5, -5, -5, 3, 3, 3)) == \
        (int(vol[:3, :3, :3].min()), int(vol[:3, :3, :3].max()))
    # degenerate box
    assert store64.region_min_max(0, 0, (60, 60, 60, 60, 70, 70)) == (0, 0)


# -- HTTP endpoints ---------------------------------------------------------

def test_http_manifest(client64, store64):
    r = client64.get("/manifest")
    assert r.status_code == 200
    man = VolumeManifest.from_json(r.text)
    assert man == store64.manifest


def test_http_brick_roundtrip(client64, store64):
    r = client64.get("/brick/0/1/1/0/1")
    assert r.status_code == 200
    assert r.headers["content-type"] == "application/octet-stream"
    assert r.content == store64.brick_bytes(0, 1, (1, 0, 1))


def test_http_brick_errors(client64):
    assert client64.get("/brick/0/0/0/0/9").status_code == 404
    assert client64.get("/brick/2/0/0/0/0").status_code == 404
    assert client64.get("/brick/0/0/0/0/x").status_code == 400


def test_http_metadata(client64, store64):
    r = client64.get("/metadata", params={"c": 0, "l": 1,
                                          "box": "0,0,0,32,32,32"})
    assert r.status_code == 200
    body = r.json()
    mn, mx = store64.region_min_max(0, 1, (0, 0, 0, 32, 32, 32))
    assert (body["min"], body["max"]) == (mn, mx)
    assert client64.get("/metadata",
                        params={"c": 0, "l": 0, "box": "1,2,3"}).status_code \
        == 400
    assert client64.get("/metadata",
                        params={"c": 9, "l": 0,
                                "box": "0,0,0,1,1,1"}).status_code == 404


def test_http_metadata_disabled_returns_501(store64):
    plain = TestClient(create_app(store64, metadata_enabled=False))
    r = plain.get("/metadata", params={"c": 0, "l": 0, "box": "0,0,0,1,1,1"})
    assert r.status_code == 501
    # bricks still served
    assert plain.get("/brick/0/0/0/0/0").status_code == 200


# -- transports -------------------------------------------------------------

def test_local_transport(store64):
    t = LocalTransport(store64)
    assert t.manifest == store64.manifest
    assert np.array_equal(t.fetch_brick(0, 0, (0, 0, 0)),
                          store64.brick(0, 0, (0, 0, 0)))
    assert t.fetch_metadata(0, 0, (0, 0, 0, 64, 64, 64)) == \
        store64.region_min_max(0, 0, (0, 0, 0, 64, 64, 64))


def test_http_transport_roundtrip(client64, store64):
    t = http_transport(client64)
    assert t.manifest == store64.manifest
    assert np.array_equal(t.fetch_brick(0, 1, (1, 0, 1)),
                          store64.brick(0, 1, (1, 0, 1)))
    assert t.fetch_metadata(0, 0, (0, 0, 0, 8, 8, 8)) == \
        store64.region_min_max(0, 0, (0, 0, 0, 8, 8, 8))
    with pytest.raises(BrickNotFound):
        t.fetch_brick(0, 0, (9, 9, 9))


def test_http_transport_metadata_fallback_flag(store64):
    plain = TestClient(create_app(store64, metadata_enabled=False))
    t = http_transport(plain)
    assert t.metadata_supported
    with pytest.raises(TransportError):
        t.fetch_metadata(0, 0, (0, 0, 0, 1, 1, 1))
    assert not t.metadata_supported


def test_http_transport_corrupt_payload(tmp_path, store64):
    import shutil
    dst = tmp_path / "ds"
    shutil.copytree(store64.root, dst)
    store = DatasetStore(dst)
    path = store.brick_path(0, 0, (0, 0, 0))
    path.write_bytes(b"garbage that is not lz4")
    t = http_transport(TestClient(create_app(store)))
    with pytest.raises(TransportError):
        t.fetch_brick(0, 0, (0, 0, 0))
