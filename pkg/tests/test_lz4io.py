import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resoctree import lz4io


@settings(max_examples=100, deadline=None)
@given(st.binary(min_size=0, max_size=1 << 16))
def test_roundtrip_random_payloads(payload):
    assert lz4io.decompress(lz4io.compress(payload)) == payload


def test_roundtrip_brick_sized_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        payload = rng.integers(0, 256, size=32 ** 3, dtype=np.uint8).tobytes()
        out = lz4io.decompress(lz4io.compress(payload),
                               expected_size=len(payload))
        assert out == payload


def test_zero_brick_compresses_small():
    payload = bytes(32 ** 3)
    comp = lz4io.compress(payload)
    assert len(comp) < len(payload) // 100
    assert lz4io.decompress(comp) == payload


def test_expected_size_mismatch_raises():
    comp = lz4io.compress(b"abcdef")
    with pytest.raises(lz4io.Lz4DecodeError):
        lz4io.decompress(comp, expected_size=5)


def test_corrupt_input_raises():
    comp = bytearray(lz4io.compress(bytes(range(256)) * 64))
    with pytest.raises(lz4io.Lz4DecodeError):
        lz4io.decompress(bytes(comp[: len(comp) // 2]),
                         expected_size=256 * 64)
    comp[4] ^= 0xFF
    with pytest.raises(lz4io.Lz4DecodeError):
        lz4io.decompress(bytes(comp), expected_size=256 * 64)


def test_garbage_input_raises():
    with pytest.raises(lz4io.Lz4DecodeError):
        lz4io.decompress(b"not lz4 data at all")
    with pytest.raises(lz4io.Lz4DecodeError):
        lz4io.decompress(b"")
