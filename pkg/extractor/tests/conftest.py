import csv

import pytest

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "an", "this", "that", "is", "was", "be", "not", "no",
    "good", "bad", "day", "user", "httpurl", "hate", "speech", "text",
    "hello", "world", "check", "now", "again", "plain", "sample",
    "##s", "##ing", "##ed", ",", ".", "!", "?", "@user",
]

SENTENCES = [
    "hello world",
    "this is a good day",
    "that was bad",
    "no hate speech",
    "check HTTPURL now",
    "plain text sample",
    "@USER said hello",
    "the day is good",
    "hello world",  # duplicate on purpose
    "hate is not good",
]


@pytest.fixture(scope="session")
def checkpoints(tmp_path_factory):
    """Three local encoder checkpoints with the production architecture
    surface (hidden size 768, pooler head) but tiny depth and vocab."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    root = tmp_path_factory.mktemp("checkpoints")
    vocab_path = root / "vocab.txt"
    vocab_path.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")

    paths = {}
    for i, model_id in enumerate(("bert", "hatebert", "bertweet")):
        out = root / model_id
        out.mkdir()
        torch.manual_seed(1000 + i)
        config = BertConfig(
            vocab_size=len(VOCAB),
            hidden_size=768,
            num_hidden_layers=1,
            num_attention_heads=4,
            intermediate_size=128,
            max_position_embeddings=128,
        )
        BertModel(config).save_pretrained(out)
        BertTokenizer(str(vocab_path)).save_pretrained(out)
        paths[model_id] = str(out)
    return paths


@pytest.fixture
def manifest(tmp_path):
    path = tmp_path / "clean.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "text", "label", "split", "clean_text"])
        for i, sentence in enumerate(SENTENCES):
            split = "train" if i < 8 else "test"
            writer.writerow([f"s{i:02d}", sentence.upper(), str(i % 2), split, sentence])
    return path
