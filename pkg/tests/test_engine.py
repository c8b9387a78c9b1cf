import numpy as np
import pytest

from resoctree.datasets import shell_volume
from resoctree.engine import Engine, EngineConfig, EngineError
from resoctree.manifest import VolumeManifest, plan_levels
from resoctree.octree import NodeAddress
from resoctree.paging import EMPTY, MAPPED, UNMAPPED


def make_engine(depth=2, cache=(5, 5, 5), m=2, channels=2, pad=None):
    man = VolumeManifest(name="t", channel_count=channels, dtype_original="u8",
                         brick_size=(16, 16, 16),
                         levels=plan_levels((64, 64, 64), (16, 16, 16), 3,
                                            (2, 2, 2)))
    return Engine(man, EngineConfig(octree_depth=depth, cache_slots=cache,
                                    channel_slots=m,
                                    metadata_pad_voxels=pad))


def payload(v=0):
    return np.full((16, 16, 16), v, dtype=np.uint8)


def test_apply_brick_keeps_octree_consistent():
    eng = make_engine()
    bid = eng.paging.encode(0, 1, (1, 0, 0))
    eng.apply_brick(bid, payload(9))
    assert eng.paging.resident_slot(bid) is not None
    eng.octree.check_mask_consistency()
    eng.octree.check_leaf_ground_truth()


def test_lru_eviction_updates_octree():
    eng = make_engine(cache=(2, 1, 1))    # 2 slots
    a = eng.paging.encode(0, 0, (0, 0, 0))
    b = eng.paging.encode(0, 0, (1, 0, 0))
    c = eng.paging.encode(0, 0, (2, 0, 0))
    eng.apply_brick(a, payload())
    eng.advance_frame()
    eng.apply_brick(b, payload())
    eng.advance_frame()
    eng.apply_brick(c, payload())         # evicts a (least recently used)
    assert eng.paging.resident_slot(a) is None
    eng.octree.check_mask_consistency()
    eng.octree.check_leaf_ground_truth()


def test_note_sampled_protects_from_eviction():
    eng = make_engine(cache=(2, 1, 1))
    a = eng.paging.encode(0, 0, (0, 0, 0))
    b = eng.paging.encode(0, 0, (1, 0, 0))
    eng.apply_brick(a, payload())
    eng.advance_frame()
    eng.apply_brick(b, payload())
    # touch a this frame: b becomes the LRU victim
    mask = np.zeros(int(eng.paging.pt_offsets[-1]), dtype=np.uint8)
    slot_a, lev_a, coord_a = eng.paging.decode(a)
    mask[eng.paging._entry_index(slot_a, lev_a, coord_a)] = 1
    eng.advance_frame()
    eng.note_sampled(mask)
    c = eng.paging.encode(0, 0, (2, 0, 0))
    eng.apply_brick(c, payload())
    assert eng.paging.resident_slot(a) is not None
    assert eng.paging.resident_slot(b) is None


def test_apply_metadata_by_node_index():
    eng = make_engine(depth=2)
    addr = NodeAddress(2, 3, 1, 0)
    eng.apply_metadata(addr.index, 1, 7, 99)
    assert eng.octree.metadata(addr, 1) == (7, 99)
    with pytest.raises(EngineError):
        eng.apply_metadata(eng.octree.num_nodes + 10, 0, 0, 0)


def test_swap_channel_resets_slot_state():
    eng = make_engine()
    bid = eng.paging.encode(0, 0, (0, 0, 0))
    other = eng.paging.encode(1, 0, (0, 0, 0))
    eng.apply_brick(bid, payload())
    eng.apply_brick(other, payload())
    eng.apply_metadata(NodeAddress(0, 0, 0, 0).index, 0, 1, 2)
    eng.swap_channel(0, 1)
    assert eng.paging.resident_slot(bid) is None
    assert eng.paging.resident_slot(other) is not None
    assert eng.octree.metadata(NodeAddress(0, 0, 0, 0), 0) is None
    assert eng.octree.residency_mask(NodeAddress(2, 0, 0, 0), 0) == 0
    assert eng.paging.channel_mapping[0] == 1
    with pytest.raises(Exception):
        eng.swap_channel(0, 5)    # dataset has 2 channels
    eng.octree.check_mask_consistency()
    eng.octree.check_leaf_ground_truth()


def test_metadata_box_dilation_and_clipping():
    eng = make_engine(pad=6)     # k=3 default pad would be 6 as well
    # interior node: depth 2 cell (1,1,1) spans voxels [16,32) per axis
    lo, hi = eng.metadata_box(NodeAddress(2, 1, 1, 1))
    assert lo == (10, 10, 10) and hi == (38, 38, 38)
    # corner node clips at the volume bounds
    lo, hi = eng.metadata_box(NodeAddress(2, 0, 0, 0))
    assert lo == (0, 0, 0) and hi == (22, 22, 22)
    lo, hi = eng.metadata_box(NodeAddress(2, 3, 3, 3))
    assert lo == (42, 42, 42) and hi == (64, 64, 64)
    # root covers everything regardless of dilation
    lo, hi = eng.metadata_box(NodeAddress(0, 0, 0, 0))
    assert lo == (0, 0, 0) and hi == (64, 64, 64)


def test_default_pad_covers_coarsest_level():
    eng = make_engine()          # k=3 levels
    assert eng.metadata_pad == 6          # ceil(1.5 * 2^(3-1))
    eng = make_engine(pad=2)
    assert eng.metadata_pad == 2


def test_fill_metadata_matches_per_node_scan():
    eng = make_engine(depth=2)
    vol = shell_volume(64)
    eng.fill_metadata_from_volumes({0: vol})
    for d in range(3):
        side = 1 << d
        for z in range(side):
            for y in range(side):
                for x in range(side):
                    addr = NodeAddress(d, x, y, z)
                    want = eng.compute_metadata_local(addr, 0, vol)
                    assert eng.octree.metadata(addr, 0) == want
    # slot 1 untouched
    assert eng.octree.metadata(NodeAddress(0, 0, 0, 0), 1) is None


def test_fill_metadata_preserves_residency_bits():
    eng = make_engine(depth=2)
    bid = eng.paging.encode(0, 0, (0, 0, 0))
    eng.apply_brick(bid, payload())
    before = eng.octree.residency_mask(NodeAddress(2, 0, 0, 0), 0)
    assert before != 0
    eng.fill_metadata_from_volumes({0: shell_volume(64)})
    assert eng.octree.residency_mask(NodeAddress(2, 0, 0, 0), 0) == before


def test_prefill_loads_everything_and_rejects_overflow():
    eng = make_engine(cache=(5, 5, 5), m=1)

    def fetch(slot, level, coord):
        return payload(level)

    eng.prefill(fetch, slots=[0])
    # 4^3 + 2^3 + 1 = 73 bricks resident
    assert eng.paging.occupied_slot_count() == 73
    for lev, g in [(0, 4), (1, 2), (2, 1)]:
        for z in range(g):
            bid = eng.paging.encode(0, lev, (z, 0, 0))
            assert eng.paging.resident_slot(bid) is not None

    small = make_engine(cache=(2, 2, 2), m=1)
    with pytest.raises(EngineError):
        small.prefill(fetch, slots=[0])


def test_metadata_bounds_every_level_sample():
    """The dilated min/max must bound trilinear samples at every level."""
    from resoctree.ingest import build_pyramid
    eng = make_engine(depth=2, m=1, cache=(6, 6, 6))
    vol = shell_volume(64)
    pyr = build_pyramid(vol, eng.manifest.levels)

    def fetch(slot, level, coord):
        arr = pyr[level]
        x, y, z = coord
        b = 16
        out = np.zeros((b, b, b), dtype=np.uint8)
        part = arr[z * b:(z + 1) * b, y * b:(y + 1) * b, x * b:(x + 1) * b]
        out[:part.shape[0], :part.shape[1], :part.shape[2]] = part
        return out

    eng.prefill(fetch, slots=[0])
    eng.fill_metadata_from_volumes({0: vol})
    rng = np.random.default_rng(7)
    for _ in range(500):
        p = rng.uniform(0.0, 1.0, 3)
        side = 4
        addr = NodeAddress(2, *(min(int(v * side), side - 1) for v in p))
        mn, mx = eng.octree.metadata(addr, 0)
        for lev in range(3):
            coord = eng.paging.brick_coord_of(lev, tuple(p))
            lin = eng.paging.resident_slot(eng.paging.encode(0, lev, coord))
            dims = eng.paging.level_dims[lev]
            local = tuple(float(p[a] * dims[a] - coord[a] * 16)
                          for a in range(3))
            val = eng.paging.sample(eng.paging.slot_triple(lin), local)
            assert mn - 1e-9 <= val <= mx + 1e-9, (p, lev, val, mn, mx)
