"""LZ4 frame compression backed by the system liblz4 via ctypes.

Brick payloads travel over the wire as standard LZ4 frames, so any stock
lz4 tool can decompress them. Only the one-shot frame API is used.
"""

import ctypes
import ctypes.util

__all__ = ["compress", "decompress", "Lz4DecodeError"]


class Lz4DecodeError(ValueError):
    """Raised when a byte stream is not a valid LZ4 frame."""


def _load_liblz4():
    name = ctypes.util.find_library("lz4")
    candidates = [name] if name else []
    candidates += ["liblz4.so.1", "liblz4.so", "liblz4.dylib"]
    for cand in candidates:
        if not cand:
            continue
        try:
            return ctypes.CDLL(cand)
        except OSError:
            continue
    raise OSError("liblz4 not found; install the lz4 runtime library")


_lib = _load_liblz4()

_lib.LZ4F_compressFrameBound.restype = ctypes.c_size_t
_lib.LZ4F_compressFrameBound.argtypes = [ctypes.c_size_t, ctypes.c_void_p]
_lib.LZ4F_compressFrame.restype = ctypes.c_size_t
_lib.LZ4F_compressFrame.argtypes = [
    ctypes.c_void_p, ctypes.c_size_t,
    ctypes.c_void_p, ctypes.c_size_t,
    ctypes.c_void_p,
]
_lib.LZ4F_isError.restype = ctypes.c_uint
_lib.LZ4F_isError.argtypes = [ctypes.c_size_t]
_lib.LZ4F_createDecompressionContext.restype = ctypes.c_size_t
_lib.LZ4F_createDecompressionContext.argtypes = [
    ctypes.POINTER(ctypes.c_void_p), ctypes.c_uint]
_lib.LZ4F_freeDecompressionContext.restype = ctypes.c_size_t
_lib.LZ4F_freeDecompressionContext.argtypes = [ctypes.c_void_p]
_lib.LZ4F_decompress.restype = ctypes.c_size_t
_lib.LZ4F_decompress.argtypes = [
    ctypes.c_void_p,
    ctypes.c_void_p, ctypes.POINTER(ctypes.c_size_t),
    ctypes.c_void_p, ctypes.POINTER(ctypes.c_size_t),
    ctypes.c_void_p,
]

_LZ4F_VERSION = 100


def compress(data: bytes) -> bytes:
    src = bytes(data)
    bound = _lib.LZ4F_compressFrameBound(len(src), None)
    dst = ctypes.create_string_buffer(bound)
    written = _lib.LZ4F_compressFrame(dst, bound, src, len(src), None)
    if _lib.LZ4F_isError(written):
        raise RuntimeError("LZ4 frame compression failed")
    return dst.raw[:written]


def decompress(data: bytes, expected_size: int | None = None) -> bytes:
    """Decompress a full LZ4 frame.

    Raises Lz4DecodeError on malformed input; never returns a partial
    payload. If expected_size is given, a size mismatch is also an error.
    """
    src = bytes(data)
    if not src:
        raise Lz4DecodeError("empty LZ4 stream")
    ctx = ctypes.c_void_p()
    err = _lib.LZ4F_createDecompressionContext(ctypes.byref(ctx), _LZ4F_VERSION)
    if _lib.LZ4F_isError(err):
        raise RuntimeError("LZ4 decompression context allocation failed")
    try:
        out = bytearray()
        chunk = ctypes.create_string_buffer(max(expected_size or 0, 1 << 16))
        src_buf = ctypes.create_string_buffer(src, len(src))
        consumed_total = 0
        while True:
            dst_size = ctypes.c_size_t(len(chunk))
            src_size = ctypes.c_size_t(len(src) - consumed_total)
            src_ptr = ctypes.byref(src_buf, consumed_total)
            hint = _lib.LZ4F_decompress(
                ctx, chunk, ctypes.byref(dst_size), src_ptr,
                ctypes.byref(src_size), None)
            if _lib.LZ4F_isError(hint):
                raise Lz4DecodeError("corrupt LZ4 frame")
            out += chunk.raw[:dst_size.value]
            consumed_total += src_size.value
            if hint == 0:
                break
            if src_size.value == 0 and dst_size.value == 0:
                raise Lz4DecodeError("truncated LZ4 frame")
        if consumed_total != len(src):
            raise Lz4DecodeError("trailing bytes after LZ4 frame")
    finally:
        _lib.LZ4F_freeDecompressionContext(ctx)
    result = bytes(out)
    if expected_size is not None and len(result) != expected_size:
        raise Lz4DecodeError(
            f"decompressed size {len(result)} != expected {expected_size}")
    return result
