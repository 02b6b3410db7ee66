import csv

import numpy as np
import pytest

from embfusion.fusion import EmbeddingMatrix, FusionSpec
from embfusion.harness import ExperimentSpec, GridPoint
from embfusion.mlp import MlpConfig
from embfusion.store import write_embeddings


def build_synthetic_experiment(
    root,
    n_train=96,
    n_test=32,
    dim=4,
    seeds=(3, 7),
    k_folds=2,
    fusion_specs=None,
    journal_name="runs.jsonl",
    data_seed=1234,
):
    """Small two-encoder dataset where the label is the sign of the joint sum.

    Cheap to train on, deterministic, and fusable by every method.
    """
    rng = np.random.default_rng(data_seed)
    n = n_train + n_test
    ids = [f"s{i:04d}" for i in range(n)]
    a = rng.normal(0, 1, size=(n, dim)).astype(np.float32)
    b = rng.normal(0, 1, size=(n, dim)).astype(np.float32)
    labels = ((a.sum(axis=1) + b.sum(axis=1)) > 0).astype(int)
    # guarantee both classes in both splits
    labels[:4] = [0, 1, 0, 1]
    labels[n_train : n_train + 4] = [0, 1, 0, 1]

    manifest_path = root / "manifest.csv"
    with open(manifest_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "text", "label", "split"])
        for i, sid in enumerate(ids):
            split = "train" if i < n_train else "test"
            writer.writerow([sid, f"text {sid}", "neg" if labels[i] == 0 else "pos", split])

    paths = {}
    for model_id, rows in (("enca", a), ("encb", b)):
        p = root / f"{model_id}.embf"
        write_embeddings(p, EmbeddingMatrix(model_id, ids, rows))
        paths[model_id] = str(p)

    if fusion_specs is None:
        fusion_specs = [
            FusionSpec(("enca",)),
            FusionSpec(("encb",)),
            FusionSpec(("enca", "encb"), "concat"),
            FusionSpec(("enca", "encb"), "add"),
        ]
    spec = ExperimentSpec(
        manifest_path=str(manifest_path),
        embedding_paths=paths,
        journal_path=str(root / journal_name),
        fusion_specs=list(fusion_specs),
        grid=[GridPoint((8,), 0.01)],
        seeds=seeds,
        k_folds=k_folds,
        mlp_defaults=MlpConfig(
            hidden_sizes=(8,),
            batch_size=32,
            max_epochs=40,
            patience_epochs=5,
            validation_fraction=0.15,
        ),
    )
    return spec


@pytest.fixture
def synth_experiment(tmp_path):
    def factory(**kwargs):
        return build_synthetic_experiment(tmp_path, **kwargs)

    return factory
