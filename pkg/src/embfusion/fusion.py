"""Embedding combination operators.

Five ways to merge per-sentence embeddings from different encoders:
element-wise addition, element-wise multiplication, concatenation,
round-robin interleaving, and per-sample random interleaving (a
degenerate baseline: dimensions stop aligning across samples).
"""
from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigError, DimMismatchError, ValidationError

METHODS = ("add", "multiply", "concat", "interleave", "random_interleave")

# Suffixes used in result-table row labels, e.g. "bert bertweet hatebert concat".
METHOD_LABELS = {
    "add": "added",
    "multiply": "multiplied",
    "concat": "concat",
    "interleave": "interleaved",
    "random_interleave": "randomlycombined",
}
LABEL_TO_METHOD = {v: k for k, v in METHOD_LABELS.items()}


@dataclass
class EmbeddingMatrix:
    """Dense n x dim float32 block of embeddings from one model.

    Row i belongs to ``sample_ids[i]``; ids are dataset-native strings so
    shuffled extraction order can never mispair encoders.
    """

    model_id: str
    sample_ids: list[str]
    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float32)
        if rows.ndim != 2:
            raise ValidationError(f"rows must be 2-D, got shape {rows.shape}")
        self.rows = rows
        self.sample_ids = list(self.sample_ids)
        if len(self.sample_ids) != rows.shape[0]:
            raise ValidationError(
                f"{len(self.sample_ids)} sample ids for {rows.shape[0]} rows"
            )
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ValidationError("sample ids must be unique")
        if rows.size and not np.isfinite(rows).all():
            raise ValidationError(f"non-finite values in embeddings of {self.model_id!r}")

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class FusionSpec:
    """Which sources to combine, how, and the seed for the random method.

    A single source is a standalone (pass-through) evaluation; the method
    is ignored for it.
    """

    sources: tuple[str, ...]
    method: str = "concat"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise ConfigError("fusion spec needs at least one source")
        if len(set(self.sources)) != len(self.sources):
            raise ConfigError(f"duplicate source ids in {self.sources}")
        if self.method not in METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}; expected one of {METHODS}"
            )

    @property
    def combination_name(self) -> str:
        """Canonical row label: lowercase ids joined by spaces plus the method suffix."""
        ids = " ".join(s.lower() for s in self.sources)
        if len(self.sources) == 1:
            return ids
        return f"{ids} {METHOD_LABELS[self.method]}"


def _as_vectors(vecs, min_count: int = 2) -> list[np.ndarray]:
    out = [np.asarray(v) for v in vecs]
    if len(out) < min_count:
        raise ValueError(f"need at least {min_count} vectors, got {len(out)}")
    for i, v in enumerate(out):
        if v.ndim != 1:
            raise ValidationError(f"input {i} is not a vector (shape {v.shape})")
    return out


def _check_equal_dims(vecs: list[np.ndarray], names=None) -> int:
    dim = vecs[0].shape[0]
    for i, v in enumerate(vecs[1:], start=1):
        if v.shape[0] != dim:
            name = names[i] if names else f"input {i}"
            raise DimMismatchError(
                f"{name} has dim {v.shape[0]}, expected {dim} (from "
                f"{names[0] if names else 'input 0'})"
            )
    return dim


def fuse_add(vecs) -> np.ndarray:
    """Element-wise sum, folded left to right for bit-determinism."""
    vecs = _as_vectors(vecs)
    _check_equal_dims(vecs)
    return functools.reduce(np.add, vecs[1:], vecs[0].copy())


def fuse_multiply(vecs) -> np.ndarray:
    """Element-wise product, folded left to right."""
    vecs = _as_vectors(vecs)
    _check_equal_dims(vecs)
    return functools.reduce(np.multiply, vecs[1:], vecs[0].copy())


def fuse_concat(vecs) -> np.ndarray:
    """Plain concatenation in source order; dims may differ."""
    vecs = _as_vectors(vecs)
    return np.concatenate(vecs)


def fuse_interleave(vecs) -> np.ndarray:
    """Round-robin merge: output[i*k + j] = vecs[j][i] for k equal-dim sources."""
    vecs = _as_vectors(vecs)
    _check_equal_dims(vecs)
    return np.stack(vecs, axis=1).reshape(-1)


def fuse_random_interleave(vecs, sample_rng: np.random.Generator) -> np.ndarray:
    """Uniformly random permutation of the concatenation, drawn from sample_rng.

    The caller supplies a per-sample stream (see :func:`sample_rng`) so each
    sample gets a fresh permutation and results stay reproducible.
    """
    vecs = _as_vectors(vecs)
    _check_equal_dims(vecs)
    merged = np.concatenate(vecs)
    return merged[sample_rng.permutation(merged.shape[0])]


def sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    """Deterministic per-sample stream keyed by (seed, sample id).

    Keying by id rather than row position makes random interleaving
    independent of the order rows happen to be stored in.
    """
    key = int(seed).to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(sample_id.encode("utf-8"), digest_size=8, key=key).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


_VECTOR_OPS = {
    "add": fuse_add,
    "multiply": fuse_multiply,
    "concat": fuse_concat,
    "interleave": fuse_interleave,
}


def fuse_matrix(matrices: list[EmbeddingMatrix], spec: FusionSpec) -> EmbeddingMatrix:
    """Apply the fusion op row-wise across pre-aligned matrices.

    All matrices must carry identical sample ids in identical order (run
    :func:`embfusion.store.align` first) and match ``spec.sources`` in order.
    """
    if [m.model_id for m in matrices] != list(spec.sources):
        raise ConfigError(
            f"matrices {[m.model_id for m in matrices]} do not match "
            f"spec sources {list(spec.sources)}"
        )
    if spec.method not in METHODS:
        raise ConfigError(f"unknown method {spec.method!r}")
    first = matrices[0]
    for m in matrices[1:]:
        if m.sample_ids != first.sample_ids:
            raise AlignmentError(
                f"sample ids of {m.model_id!r} are not aligned with {first.model_id!r}"
            )

    if len(matrices) == 1:
        return EmbeddingMatrix(spec.combination_name, list(first.sample_ids), first.rows.copy())

    names = [m.model_id for m in matrices]
    dims = [m.dim for m in matrices]
    if spec.method != "concat":
        for name, d in zip(names[1:], dims[1:]):
            if d != dims[0]:
                raise DimMismatchError(
                    f"{name} has dim {d}, expected {dims[0]} (from {names[0]})"
                )

    blocks = [m.rows for m in matrices]
    n = first.n_samples
    if spec.method == "add":
        out = functools.reduce(np.add, blocks[1:], blocks[0].copy())
    elif spec.method == "multiply":
        out = functools.reduce(np.multiply, blocks[1:], blocks[0].copy())
    elif spec.method == "concat":
        out = np.concatenate(blocks, axis=1)
    elif spec.method == "interleave":
        # stack axis=2 then row-major reshape yields the round-robin order
        out = np.stack(blocks, axis=2).reshape(n, -1)
    else:
        merged = np.concatenate(blocks, axis=1)
        out = np.empty_like(merged)
        for i, sid in enumerate(first.sample_ids):
            rng = sample_rng(spec.seed, sid)
            out[i] = merged[i, rng.permutation(merged.shape[1])]

    return EmbeddingMatrix(spec.combination_name, list(first.sample_ids), out)
