import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resoctree.octree import NodeAddress, OctreeConfig, ResidencyOctree
from resoctree.paging import MultiChannelPaging, PagingConfig
from resoctree.render import (ChannelSettings, RenderConfig, RenderError,
                              choose_resolution_level, choose_traversal_depth,
                              composite_sample, get_alternative_brick,
                              traverse_sample)
from resoctree.transfer import grayscale_ramp_tf, transparent_tf


def make_octree(depth=3, m=2, k=3, cache=(3, 3, 3)):
    config = PagingConfig(brick_size=(16, 16, 16), cache_slots=cache, m=m, k=k)
    dims = [(64, 64, 64), (32, 32, 32), (16, 16, 16)][:k]
    grids = [(4, 4, 4), (2, 2, 2), (1, 1, 1)][:k]
    paging = MultiChannelPaging(config, dims, grids)
    octree = ResidencyOctree(OctreeConfig(depth=depth, channel_slots=m), paging)
    return octree, paging


def payload(v=0):
    return np.full((16, 16, 16), v, dtype=np.uint8)


def insert(octree, paging, slot, level, coord, value=0, frame=1):
    bid = paging.encode(slot, level, coord)
    _, evicted = paging.insert_brick(bid, payload(value), frame)
    if evicted is not None:
        octree.on_brick_evicted(evicted)
    octree.on_brick_inserted(bid)
    return bid


# -- config validation ------------------------------------------------------

def test_config_validation():
    with pytest.raises(RenderError):
        RenderConfig(base_step=0.0)
    with pytest.raises(RenderError):
        RenderConfig(early_term_alpha=1.5)
    with pytest.raises(RenderError):
        RenderConfig(max_requests_per_frame=0)
    with pytest.raises(RenderError):
        ChannelSettings(slot=0, tf=transparent_tf(), level_range=(3, 1))


# -- resolution / depth selection -------------------------------------------

def test_choose_resolution_level_worked_examples():
    # one level per doubling of eye distance past the reference distance
    assert choose_resolution_level(0.5, 1.0) == 0
    assert choose_resolution_level(1.0, 1.0) == 0
    assert choose_resolution_level(1.9, 1.0) == 0
    assert choose_resolution_level(2.0, 1.0) == 1
    assert choose_resolution_level(3.9, 1.0) == 1
    assert choose_resolution_level(4.0, 1.0) == 2
    assert choose_resolution_level(100.0, 1.0, 0, 3) == 3      # clamped hi
    assert choose_resolution_level(8.0, 1.0, 2, 15) == 3
    assert choose_resolution_level(0.1, 1.0, 2, 15) == 2       # clamped lo
    assert choose_resolution_level(1.0, 0.25) == 2             # scaled t0


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.05, 4.0))
def test_choose_resolution_level_formula(t, t0):
    want = max(0, min(15, int(math.floor(math.log2(max(t / t0, 1.0))))))
    assert choose_resolution_level(t, t0) == want


def test_choose_traversal_depth_worked_examples():
    # deepest node level whose edge (2^-d) still covers one step
    assert choose_traversal_depth(1.0 / 8.0, 5) == 3
    assert choose_traversal_depth(1.0 / 256.0, 3) == 3         # clamped
    assert choose_traversal_depth(0.3, 5) == 1
    assert choose_traversal_depth(2.0, 5) == 0
    assert choose_traversal_depth(1.0 / 64.0, 6) == 6


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 4.0), st.integers(0, 10))
def test_choose_traversal_depth_covers_step(step, depth):
    d = choose_traversal_depth(step, depth)
    assert 0 <= d <= depth
    # the chosen node edge (2^-d) covers one step; a deeper node would not
    if step <= 1.0:
        assert 2.0 ** -d >= step * (1 - 1e-12)
    if d < depth:
        assert 2.0 ** -(d + 1) < step * (1 + 1e-12)


# -- compositing ------------------------------------------------------------

def test_composite_single_channel_closed_form():
    acc = composite_sample((0, 0, 0, 0), [(1.0, 0.5, 0.25, 0.4)], 1.0)
    assert acc == pytest.approx((0.4, 0.2, 0.1, 0.4))
    # second identical sample: front-to-back over
    acc2 = composite_sample(acc, [(1.0, 0.5, 0.25, 0.4)], 1.0)
    want_a = 0.4 + 0.6 * 0.4
    assert acc2[3] == pytest.approx(want_a)
    assert acc2[0] == pytest.approx(0.4 + 0.6 * 0.4)


def test_composite_opacity_correction():
    # doubling the step doubles optical depth: a = 1 - (1-a0)^2
    acc = composite_sample((0, 0, 0, 0), [(1, 1, 1, 0.3)], 2.0)
    assert acc[3] == pytest.approx(1.0 - 0.7 ** 2)
    # half step
    acc = composite_sample((0, 0, 0, 0), [(1, 1, 1, 0.3)], 0.5)
    assert acc[3] == pytest.approx(1.0 - math.sqrt(0.7))
    # color scaled by the same correction
    assert acc[0] == pytest.approx((1.0 - math.sqrt(0.7)))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 6), st.floats(0.01, 0.95), st.floats(0.25, 4.0))
def test_composite_channel_count_alpha(m, a, ratio):
    # m channels of equal opacity blend to 1 - (1-a)^m before correction
    acc = composite_sample((0, 0, 0, 0), [(0.5, 0.5, 0.5, a)] * m, ratio)
    want = 1.0 - ((1.0 - a) ** m) ** ratio
    assert acc[3] == pytest.approx(want, abs=1e-5)


def test_composite_zero_alpha_noop():
    acc = (0.1, 0.2, 0.3, 0.4)
    assert composite_sample(acc, [(1, 1, 1, 0.0), (0.5, 0, 0, 0.0)], 1.0) == acc


def test_composite_saturates_at_one():
    acc = (0, 0, 0, 0)
    for _ in range(200):
        acc = composite_sample(acc, [(1, 1, 1, 0.5)], 1.0)
    assert acc[3] == pytest.approx(1.0)
    assert acc[0] <= 1.0 + 1e-9


# -- alternative brick selection --------------------------------------------

def test_alternative_prefers_nearest_then_coarser():
    octree, paging = make_octree(k=3)
    pos = (0.1, 0.1, 0.1)
    node = NodeAddress(3, 0, 0, 0)
    assert get_alternative_brick(octree, paging, 0, 1, node, pos) is None
    insert(octree, paging, 0, 0, (0, 0, 0))
    # only level 0 resident; desired 1 -> fall to 0
    assert get_alternative_brick(octree, paging, 0, 1, node, pos) == \
        (0, (0, 0, 0))
    insert(octree, paging, 0, 2, (0, 0, 0))
    # equal distance from desired 1: coarser (level 2) wins the tie
    assert get_alternative_brick(octree, paging, 0, 1, node, pos) == \
        (2, (0, 0, 0))
    insert(octree, paging, 0, 1, (0, 0, 0))
    # desired 0 resident is not what we ask: desired 1 now has |d|=0? the
    # helper is only called for a missing desired level; ask for level 0
    # after evicting it
    assert get_alternative_brick(octree, paging, 0, 0, node, pos)[0] in (1, 2)


def test_alternative_respects_position_and_slot():
    octree, paging = make_octree(k=3)
    insert(octree, paging, 1, 0, (3, 3, 3))
    node = NodeAddress(3, 7, 7, 7)
    pos = (0.95, 0.95, 0.95)
    assert get_alternative_brick(octree, paging, 1, 1, node, pos) == \
        (0, (3, 3, 3))
    # other slot sees nothing
    assert get_alternative_brick(octree, paging, 0, 1, node, pos) is None
    # mask says level 0 resident for the node, but a *different* position's
    # brick: residency is per-node, mapping checked per-brick
    assert get_alternative_brick(
        octree, paging, 1, 1, NodeAddress(3, 7, 7, 7), (0.99, 0.99, 0.99)) \
        == (0, (3, 3, 3))


# -- multi-channel traversal ------------------------------------------------

TF = grayscale_ramp_tf(threshold=40.0)


def set_meta_all(octree, slot, mn, mx, depth=3):
    for d in range(depth + 1):
        side = 1 << d
        for z in range(side):
            for y in range(side):
                for x in range(side):
                    octree.set_node_metadata(NodeAddress(d, x, y, z), slot,
                                             mn, mx)


def test_traverse_empty_channel_resolves_at_start_depth():
    octree, paging = make_octree()
    set_meta_all(octree, 0, 0, 10)     # everywhere below the tf threshold
    res = traverse_sample(octree, paging, [ChannelSettings(0, TF)],
                          (0.3, 0.3, 0.3), [0], 3, start_depth=1)
    assert [o.kind for o in res.outcomes] == ["zero"]
    assert res.outcomes[0].resolved_depth == 1
    assert res.skippable and res.skip_node == NodeAddress(1, 0, 0, 0)
    assert res.steps == 1
    assert res.brick_requests == [] and res.metadata_requests == []


def test_traverse_homogeneous_is_const():
    octree, paging = make_octree()
    octree.config = OctreeConfig(depth=3, channel_slots=2, homogeneity_eps=2.0)
    set_meta_all(octree, 0, 100, 101)
    res = traverse_sample(octree, paging, [ChannelSettings(0, TF)],
                          (0.3, 0.3, 0.3), [0], 3, start_depth=0)
    assert res.outcomes[0].kind == "const"
    assert res.outcomes[0].value == 100.0
    assert res.skippable      # const counts toward a skippable sample


def test_traverse_invalid_metadata_requests_and_descends():
    octree, paging = make_octree()
    res = traverse_sample(octree, paging, [ChannelSettings(0, TF)],
                          (0.9, 0.9, 0.9), [0], 3, start_depth=2)
    # INVALID everywhere, nothing resident: request metadata for the node
    # visited, then the empty mask turns it into an unmapped miss
    assert res.outcomes[0].kind == "miss"
    assert res.metadata_requests == [(NodeAddress(2, 3, 3, 3), 0)]
    assert res.brick_requests == [paging.encode(0, 0, (3, 3, 3))]
    assert res.skippable      # unmapped-at-node counts as skippable


def test_traverse_descends_to_depth_limit_and_samples():
    octree, paging = make_octree()
    set_meta_all(octree, 0, 0, 255)    # never empty, never homogeneous
    insert(octree, paging, 0, 0, (1, 1, 1), value=50)
    res = traverse_sample(octree, paging, [ChannelSettings(0, TF)],
                          (0.4, 0.4, 0.4), [0], 3, start_depth=1)
    out = res.outcomes[0]
    assert out.kind == "sample" and out.level == 0 and out.coord == (1, 1, 1)
    assert out.resolved_depth == 3 and res.end_depth == 3
    # visited depths 1, 2, 3 for the single channel
    assert res.steps == 3
    assert not res.skippable


def test_traverse_shares_descent_across_channels():
    octree, paging = make_octree(m=2)
    set_meta_all(octree, 0, 0, 255)
    set_meta_all(octree, 1, 0, 10)     # empty channel
    insert(octree, paging, 0, 0, (1, 1, 1), value=50)
    chans = [ChannelSettings(0, TF), ChannelSettings(1, TF)]
    res = traverse_sample(octree, paging, chans, (0.4, 0.4, 0.4), [0, 0], 3,
                          start_depth=1)
    assert [o.kind for o in res.outcomes] == ["sample", "zero"]
    # channel 0 descended 1->3 (3 visits); channel 1 resolves at depth 3 in
    # one more visit because the cursor never re-ascends
    assert res.outcomes[1].resolved_depth == 3
    assert res.steps == 4
    assert not res.skippable


def test_traverse_miss_with_substitute_not_skippable():
    octree, paging = make_octree()
    set_meta_all(octree, 0, 0, 255)
    insert(octree, paging, 0, 1, (0, 0, 0), value=80)
    res = traverse_sample(octree, paging, [ChannelSettings(0, TF)],
                          (0.3, 0.3, 0.3), [0], 3, start_depth=0)
    out = res.outcomes[0]
    # desired level 0 missing: request it, render the level-1 substitute
    assert res.brick_requests == [paging.encode(0, 0, (1, 1, 1))]
    assert out.kind == "sample" and out.level == 1
    assert not res.skippable
