"""EMBF v1 file I/O.

Implements the interchange layout consumed by the benchmark toolkit, all
integers little-endian:

    magic "EMBF" | version u16=1 | model_id (u16 len + utf-8) | dim u32 |
    count u64 | id table: count x (u16 len + utf-8) |
    payload: count*dim float32 row-major | CRC-32 u32

The CRC-32 (IEEE) covers everything after the magic, checksum excluded.
"""
from __future__ import annotations

import os
import struct
import zlib

import numpy as np

MAGIC = b"EMBF"
VERSION = 1


class EmbfError(Exception):
    """Raised for malformed, corrupt, or unsupported EMBF files."""


def write_embf(path, model_id: str, sample_ids: list[str], rows: np.ndarray) -> None:
    """Write one embedding block atomically (temp file + rename)."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2 or rows.shape[0] != len(sample_ids):
        raise EmbfError(f"rows {rows.shape} do not match {len(sample_ids)} sample ids")
    if rows.size and not np.isfinite(rows).all():
        raise EmbfError("refusing to write non-finite embeddings")
    mid = model_id.encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<H", VERSION),
        struct.pack("<H", len(mid)),
        mid,
        struct.pack("<I", rows.shape[1]),
        struct.pack("<Q", rows.shape[0]),
    ]
    for sid in sample_ids:
        raw = sid.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(rows.tobytes())
    body = b"".join(parts)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body[4:]) & 0xFFFFFFFF))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_embf(path) -> tuple[str, list[str], np.ndarray]:
    """Read and validate a file; returns (model_id, sample_ids, rows)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise EmbfError(f"{path}: not an EMBF file")
    if len(data) < 10:
        raise EmbfError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<H", data, 4)
    if version > VERSION:
        raise EmbfError(f"{path}: unsupported version {version}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[4:-4]) & 0xFFFFFFFF != crc:
        raise EmbfError(f"{path}: checksum mismatch")
    off = 6
    (mid_len,) = struct.unpack_from("<H", data, off)
    off += 2
    model_id = data[off : off + mid_len].decode("utf-8")
    off += mid_len
    (dim,) = struct.unpack_from("<I", data, off)
    off += 4
    (count,) = struct.unpack_from("<Q", data, off)
    off += 8
    sample_ids = []
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, off)
        off += 2
        sample_ids.append(data[off : off + n].decode("utf-8"))
        off += n
    payload = data[off : off + count * dim * 4]
    if len(payload) != count * dim * 4 or off + len(payload) + 4 != len(data):
        raise EmbfError(f"{path}: payload does not match declared shape")
    rows = np.frombuffer(payload, dtype="<f4").reshape(count, dim).astype(np.float32)
    return model_id, sample_ids, rows
