"""Pooler-output embedding extraction.

For every manifest row: tokenize the cleaned text, run the encoder in eval
mode, and keep the pooler output (the final-layer hidden state of the first
token passed through the pretrained linear + tanh head). One 768-dim f32
row per manifest row, in manifest order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .embf import write_embf

# Published checkpoints for the three supported encoders. Pin a specific
# revision through ExtractorConfig.revision for byte-reproducible extraction
# across machines.
CHECKPOINTS = {
    "bert": "bert-base-uncased",
    "hatebert": "GroNLP/hateBERT",
    "bertweet": "vinai/bertweet-base",
}


class ExtractError(Exception):
    pass


@dataclass
class ExtractorConfig:
    model_id: str
    manifest_path: str
    output_path: str
    checkpoint: str | None = None  # local dir or hub name; defaults to the registry
    revision: str | None = None
    batch_size: int = 32
    max_sequence_length: int = 128
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.model_id not in CHECKPOINTS:
            raise ExtractError(
                f"model_id must be one of {sorted(CHECKPOINTS)}, got {self.model_id!r}"
            )
        if self.max_sequence_length < 8:
            raise ExtractError("max_sequence_length must be >= 8")
        if self.batch_size < 1:
            raise ExtractError("batch_size must be >= 1")

    @property
    def checkpoint_source(self) -> str:
        return self.checkpoint or CHECKPOINTS[self.model_id]


def read_manifest_texts(path) -> tuple[list[str], list[str]]:
    """Returns (sample ids, cleaned texts) in file order."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "id" not in fields:
            raise ExtractError(f"{path}: manifest needs an 'id' column")
        if "clean_text" not in fields:
            raise ExtractError(
                f"{path}: manifest has no 'clean_text' column; run the preprocess "
                "step first"
            )
        ids, texts = [], []
        for row in reader:
            ids.append(row["id"])
            texts.append(row["clean_text"])
    if len(set(ids)) != len(ids):
        raise ExtractError(f"{path}: duplicate sample ids")
    return ids, texts


def _embed_unique(texts: list[str], config: ExtractorConfig) -> dict[str, np.ndarray]:
    """Embed each distinct text once; identical inputs share one row by
    construction, so duplicates are bit-identical."""
    import torch
    from transformers import AutoModel, AutoTokenizer

    source = config.checkpoint_source
    tokenizer = AutoTokenizer.from_pretrained(source, revision=config.revision)
    model = AutoModel.from_pretrained(source, revision=config.revision)
    model.to(config.device)
    model.eval()

    unique = list(dict.fromkeys(texts))
    vectors: dict[str, np.ndarray] = {}
    with torch.no_grad():
        for start in range(0, len(unique), config.batch_size):
            batch = unique[start : start + config.batch_size]
            encoded = tokenizer(
                batch,
                truncation=True,
                max_length=config.max_sequence_length,
                padding=True,
                return_tensors="pt",
            ).to(config.device)
            try:
                out = model(**encoded)
            except RuntimeError as exc:
                if "out of memory" in str(exc).lower():
                    raise ExtractError(
                        f"encoder ran out of memory on a batch of {len(batch)}; "
                        "retry with a smaller --batch-size"
                    ) from exc
                raise
            pooled = getattr(out, "pooler_output", None)
            if pooled is None:
                raise ExtractError(
                    f"checkpoint {source!r} exposes no pooler output"
                )
            rows = pooled.cpu().numpy().astype(np.float32)
            for text, row in zip(batch, rows):
                vectors[text] = row
    return vectors


def extract(config: ExtractorConfig) -> str:
    """Run extraction end to end; returns the output path."""
    ids, texts = read_manifest_texts(config.manifest_path)
    if ids:
        vectors = _embed_unique(texts, config)
        rows = np.stack([vectors[t] for t in texts]).astype(np.float32)
    else:
        rows = np.zeros((0, 768), dtype=np.float32)
    write_embf(config.output_path, config.model_id, ids, rows)
    return config.output_path
