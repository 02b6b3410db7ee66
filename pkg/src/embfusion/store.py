"""EMBF v1 embedding files, dataset manifests, and matrix alignment.

EMBF layout (all integers little-endian):

    magic "EMBF" | version u16 | model_id (u16 len + utf-8) | dim u32 |
    count u64 | id table: count x (u16 len + utf-8) |
    payload: count*dim float32 row-major | CRC-32 u32

The CRC (IEEE polynomial) covers every byte after the magic, checksum
excluded. Files are written to a temp path and renamed, so a visible file
is always complete.
"""
from __future__ import annotations

import csv
import os
import struct
import zlib
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlignmentError,
    ChecksumError,
    DuplicateIdError,
    FormatError,
    SchemaError,
    ValidationError,
    VersionError,
)
from .fusion import EmbeddingMatrix

MAGIC = b"EMBF"
VERSION = 1
SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    text: str
    label: int
    split: str
    clean_text: str | None = None


@dataclass
class DatasetManifest:
    """Per-sample id, text, integer label, and split assignment."""

    records: list[ManifestRecord]
    label_names: list[str]

    def split_records(self, split: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == split]

    def class_counts(self, split: str) -> dict[str, int]:
        """Label-name -> count within one split (cross-checkable against
        published dataset statistics)."""
        counts = Counter(r.label for r in self.split_records(split))
        return {name: counts.get(i, 0) for i, name in enumerate(self.label_names)}


def load_manifest(path, label_names: list[str] | None = None) -> DatasetManifest:
    """Parse a manifest CSV with header id,text,label,split (clean_text optional).

    Label strings map to indices in first-seen order unless ``label_names``
    pins the ordering.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in ("id", "text", "label", "split") if c not in fields]
        if missing:
            raise SchemaError(f"manifest {path} missing columns: {missing}")
        names = list(label_names) if label_names is not None else []
        pinned = label_names is not None
        records: list[ManifestRecord] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            rid = row["id"]
            if rid in seen:
                raise DuplicateIdError(f"duplicate id {rid!r} at line {lineno}")
            seen.add(rid)
            split = row["split"]
            if split not in SPLITS:
                raise SchemaError(
                    f"line {lineno}: split {split!r} not in {SPLITS}"
                )
            label = row["label"]
            if label not in names:
                if pinned:
                    raise SchemaError(
                        f"line {lineno}: label {label!r} not in label_names {names}"
                    )
                names.append(label)
            records.append(
                ManifestRecord(
                    id=rid,
                    text=row["text"],
                    label=names.index(label),
                    split=split,
                    clean_text=row.get("clean_text"),
                )
            )
    return DatasetManifest(records=records, label_names=names)


def write_embeddings(path, matrix: EmbeddingMatrix) -> None:
    """Serialize a matrix to EMBF v1 at ``path`` (atomic temp+rename)."""
    rows = np.ascontiguousarray(matrix.rows, dtype="<f4")
    if rows.size and not np.isfinite(rows).all():
        raise ValidationError(f"refusing to write non-finite rows for {matrix.model_id!r}")
    mid = matrix.model_id.encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<H", VERSION),
        struct.pack("<H", len(mid)),
        mid,
        struct.pack("<I", matrix.dim),
        struct.pack("<Q", matrix.n_samples),
    ]
    for sid in matrix.sample_ids:
        sb = sid.encode("utf-8")
        parts.append(struct.pack("<H", len(sb)))
        parts.append(sb)
    parts.append(rows.tobytes())
    body = b"".join(parts)
    crc = zlib.crc32(body[len(MAGIC):]) & 0xFFFFFFFF
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", crc))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_embeddings(path) -> EmbeddingMatrix:
    """Read and validate an EMBF v1 file (magic, version, checksum, layout)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not an EMBF file")
    if len(data) < len(MAGIC) + 2 + 4:
        raise FormatError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<H", data, 4)
    if version > VERSION:
        raise VersionError(f"{path}: version {version} > supported {VERSION}")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[4:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError(f"{path}: CRC mismatch")

    off = 6
    try:
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
            (sid_len,) = struct.unpack_from("<H", data, off)
            off += 2
            sample_ids.append(data[off : off + sid_len].decode("utf-8"))
            off += sid_len
        payload_len = count * dim * 4
        payload = data[off : off + payload_len]
        if len(payload) != payload_len:
            raise FormatError(f"{path}: payload shorter than declared shape")
        off += payload_len
    except struct.error as exc:
        raise FormatError(f"{path}: truncated file ({exc})") from exc
    if off + 4 != len(data):
        raise FormatError(f"{path}: {len(data) - off - 4} unexpected trailing bytes")
    rows = np.frombuffer(payload, dtype="<f4").reshape(count, dim).astype(np.float32)
    return EmbeddingMatrix(model_id=model_id, sample_ids=sample_ids, rows=rows)


def align_ids(ids: list[str], matrices: list[EmbeddingMatrix]) -> list[EmbeddingMatrix]:
    """Reorder every matrix to ``ids`` order, dropping rows not listed."""
    out = []
    for m in matrices:
        index = {sid: i for i, sid in enumerate(m.sample_ids)}
        missing = [i for i in ids if i not in index]
        if missing:
            shown = ", ".join(repr(i) for i in missing[:5])
            more = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
            raise AlignmentError(f"model {m.model_id!r} is missing ids: {shown}{more}")
        order = [index[i] for i in ids]
        out.append(EmbeddingMatrix(m.model_id, list(ids), m.rows[order]))
    return out


def align(
    manifest: DatasetManifest,
    matrices: list[EmbeddingMatrix],
    split: str,
) -> tuple[list[EmbeddingMatrix], np.ndarray]:
    """Reorder every matrix to the manifest order of one split.

    Returns the reordered matrices plus the row-aligned integer labels.
    Extra ids in a matrix are dropped; missing ids raise AlignmentError.
    """
    if split not in SPLITS:
        raise SchemaError(f"unknown split {split!r}")
    records = manifest.split_records(split)
    ids = [r.id for r in records]
    labels = np.array([r.label for r in records], dtype=np.int64)
    return align_ids(ids, matrices), labels
