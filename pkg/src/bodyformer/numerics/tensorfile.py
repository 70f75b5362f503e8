"""Flat binary container for named float64 arrays.

Layout (all integers little-endian)::

    magic      4 bytes   b"BFTN"
    version    u32       currently 1
    meta_len   u32       byte length of the metadata block
    meta       bytes     UTF-8 JSON object, keys sorted (may be "{}")
    count      u32       number of records
    count x record:
        name_len  u32
        name      bytes  UTF-8
        ndim      u32
        dims      u64 x ndim
        values    f64 x prod(dims), row-major, little-endian

Used for model checkpoints, feature caches, PCA projections and motion frames.
Writing the same arrays and metadata always produces the same bytes.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import ParseError

MAGIC = b"BFTN"
VERSION = 1


def dumps(arrays, meta=None):
    meta_bytes = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes,
             struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def save(path, arrays, meta=None):
    with open(path, "wb") as fh:
        fh.write(dumps(arrays, meta))


class _Reader:
    def __init__(self, buf, source):
        self.buf = buf
        self.pos = 0
        self.source = source

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise ParseError(f"{self.source}: truncated while reading {what} "
                             f"(offset {self.pos}, need {n} bytes, have {len(self.buf) - self.pos})")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]


def loads(buf, source="<bytes>"):
    """Parse a container; returns ``(arrays, meta)``."""
    r = _Reader(buf, source)
    if r.take(4, "magic") != MAGIC:
        raise ParseError(f"{source}: bad magic bytes, not a tensor file")
    version = r.u32("version")
    if version != VERSION:
        raise ParseError(f"{source}: unsupported version {version}")
    meta_raw = r.take(r.u32("metadata length"), "metadata")
    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{source}: corrupt metadata block: {exc}") from None
    arrays = {}
    count = r.u32("record count")
    for i in range(count):
        what = f"record {i}"
        name = r.take(r.u32(f"{what} name length"), f"{what} name").decode("utf-8")
        what = f"record {i} ({name!r})"
        ndim = r.u32(f"{what} rank")
        dims = struct.unpack(f"<{ndim}Q", r.take(8 * ndim, f"{what} dims"))
        n = int(np.prod(dims)) if ndim else 1
        values = np.frombuffer(r.take(8 * n, f"{what} values"), dtype="<f8")
        arrays[name] = values.astype(np.float64).reshape(dims)
    if r.pos != len(buf):
        raise ParseError(f"{source}: {len(buf) - r.pos} trailing bytes after record {count - 1}")
    return arrays, meta


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read(), str(path))
