"""Embedding-fusion benchmark toolkit.

Combine sentence embeddings from multiple pretrained encoders (addition,
multiplication, concatenation, interleaving, random interleaving), train
MLP classifiers over the combinations with grid search, three seeds, and
stratified five-fold cross-validation, and report accuracy / macro-F1
tables and figures.
"""

from .fusion import (
    EmbeddingMatrix,
    FusionSpec,
    fuse_add,
    fuse_concat,
    fuse_interleave,
    fuse_matrix,
    fuse_multiply,
    fuse_random_interleave,
)
from .harness import (
    ExperimentSpec,
    GridPoint,
    RunRecord,
    aggregate,
    enumerate_fusion_specs,
    grid_search,
    run_experiment,
    stratified_kfold,
)
from .metrics import ConfusionMatrix, accuracy, confusion, macro_f1
from .mlp import MlpConfig, MlpModel, fit, init_mlp, predict, predict_proba
from .store import DatasetManifest, align, load_manifest, read_embeddings, write_embeddings
from .textprep import PreprocessConfig, preprocess

__version__ = "0.1.0"

__all__ = [
    "EmbeddingMatrix",
    "FusionSpec",
    "fuse_add",
    "fuse_concat",
    "fuse_interleave",
    "fuse_matrix",
    "fuse_multiply",
    "fuse_random_interleave",
    "ExperimentSpec",
    "GridPoint",
    "RunRecord",
    "aggregate",
    "enumerate_fusion_specs",
    "grid_search",
    "run_experiment",
    "stratified_kfold",
    "ConfusionMatrix",
    "accuracy",
    "confusion",
    "macro_f1",
    "MlpConfig",
    "MlpModel",
    "fit",
    "init_mlp",
    "predict",
    "predict_proba",
    "DatasetManifest",
    "align",
    "load_manifest",
    "read_embeddings",
    "write_embeddings",
    "PreprocessConfig",
    "preprocess",
    "__version__",
]
