import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from resoctree.ingest import (IngestError, build_pyramid, compress_brick,
                              decompress_brick, downsample_box, extract_brick,
                              load_raw_file, normalize_to_u8)
from resoctree.manifest import plan_levels


def test_normalize_range():
    raw = np.array([[[10, 20], [30, 40]], [[50, 60], [70, 90]]],
                   dtype=np.uint16)
    out = normalize_to_u8(raw)
    assert out.min() == 0 and out.max() == 255
    assert out.dtype == np.uint8
    # order preserved
    assert np.all(np.argsort(raw.ravel()) == np.argsort(out.ravel()))


def test_normalize_constant_is_zero():
    assert np.all(normalize_to_u8(np.full((4, 4, 4), 7.5)) == 0)


def test_normalize_rounding():
    raw = np.array([0, 1, 2], dtype=np.float64).reshape(1, 1, 3)
    out = normalize_to_u8(raw)
    # 1 of [0,2] maps to 127.5, which rounds half-up to 128
    assert list(out.ravel()) == [0, 128, 255]


def _downsample_oracle(arr, factors):
    """Brute-force box filter with edge replication, written independently."""
    fx, fy, fz = factors
    nz, ny, nx = arr.shape
    oz = -(-nz // fz) if fz == 2 else nz
    oy = -(-ny // fy) if fy == 2 else ny
    ox = -(-nx // fx) if fx == 2 else nx
    out = np.zeros((oz, oy, ox))
    for z in range(oz):
        for y in range(oy):
            for x in range(ox):
                vals = []
                for dz in range(fz):
                    for dy in range(fy):
                        for dx in range(fx):
                            sz = min(z * fz + dz, nz - 1)
                            sy = min(y * fy + dy, ny - 1)
                            sx = min(x * fx + dx, nx - 1)
                            vals.append(float(arr[sz, sy, sx]))
                out[z, y, x] = np.floor(np.mean(vals) + 0.5)
    return out.astype(np.uint8)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.uint8, st.tuples(st.integers(1, 7), st.integers(1, 7),
                                      st.integers(1, 7))),
       st.sampled_from([(2, 2, 2), (2, 1, 1), (1, 2, 1), (2, 2, 1)]))
def test_downsample_matches_bruteforce(arr, factors):
    got = downsample_box(arr, factors)
    want = _downsample_oracle(arr, factors)
    assert got.shape == want.shape
    assert np.array_equal(got, want)


def test_pyramid_shapes():
    levels = plan_levels((33, 20, 17), (8, 8, 8), 3, (2, 2, 2))
    pyr = build_pyramid(np.zeros((17, 20, 33), dtype=np.uint8), levels)
    assert [p.shape for p in pyr] == [(17, 20, 33), (9, 10, 17), (5, 5, 9)]


def test_extract_brick_interior_and_edge():
    data = np.arange(5 * 6 * 7, dtype=np.uint8).reshape(5, 6, 7)
    b = extract_brick(data, (0, 0, 0), (4, 4, 4))
    assert np.array_equal(b, data[:4, :4, :4])
    edge = extract_brick(data, (1, 1, 1), (4, 4, 4))
    assert edge.shape == (4, 4, 4)
    # replicated voxels equal the nearest in-volume voxel
    assert edge[0, 0, 0] == data[4, 4, 4]
    assert edge[1, 0, 0] == data[4, 4, 4]       # z clamped at 4
    assert edge[0, 0, 2] == data[4, 4, 6]
    assert edge[0, 0, 3] == data[4, 4, 6]       # x clamped at 6


def test_extract_brick_out_of_grid():
    data = np.zeros((8, 8, 8), dtype=np.uint8)
    with pytest.raises(IngestError):
        extract_brick(data, (2, 0, 0), (4, 4, 4))


def test_brick_compress_roundtrip(rng):
    for _ in range(25):
        payload = rng.integers(0, 256, size=(8, 8, 8), dtype=np.uint8)
        out = decompress_brick(compress_brick(payload), (8, 8, 8))
        assert np.array_equal(out, payload)


def test_hierarchy_on_disk(store64):
    man = store64.manifest
    assert man.channel_count == 1
    assert len(man.levels) == 3
    assert man.levels[0].dims == (64, 64, 64)
    assert man.levels[0].brick_grid_dims == (4, 4, 4)
    # every brick file exists and decodes to the level data
    lvl1 = store64.level_array(0, 1)
    assert lvl1.shape == (32, 32, 32)
    brick = store64.brick(0, 1, (1, 0, 1))
    assert np.array_equal(brick, lvl1[16:32, 0:16, 16:32])


def test_load_raw_file(tmp_path, rng):
    vol = rng.integers(0, 65535, size=(2, 4, 3, 5), dtype=np.uint16)
    path = tmp_path / "vol.raw"
    vol.tofile(path)
    chans = load_raw_file(str(path), (5, 3, 4), "u16", channels=2)
    assert len(chans) == 2
    assert np.array_equal(chans[1], vol[1])
    with pytest.raises(IngestError):
        load_raw_file(str(path), (5, 3, 4), "u16", channels=3)
