"""Experiment orchestration: stratified CV, grid search, seeded sweeps.

For every (combination, seed) cell: fuse the sources, grid-search the MLP
hyperparameters with k-fold CV on the training split, retrain the winner on
the full training split, and evaluate once on the test split. Results stream
into an append-only JSONL journal so interrupted sweeps resume where they
stopped, byte for byte.
"""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .errors import ConfigError, EmbFusionError, StratificationError
from .fusion import METHODS, EmbeddingMatrix, FusionSpec, fuse_matrix
from .metrics import accuracy, confusion, macro_f1
from .mlp import MlpConfig, fit, init_mlp, predict
from .store import DatasetManifest, align_ids, load_manifest, read_embeddings

JOURNAL_SCHEMA = 1
DEFAULT_SEEDS = (3, 7, 42)


@dataclass(frozen=True)
class GridPoint:
    """One hyperparameter combination searched by the grid."""

    hidden_sizes: tuple[int, ...]
    learning_rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))

    @property
    def label(self) -> str:
        hidden = "x".join(str(h) for h in self.hidden_sizes)
        return f"hidden={hidden},lr={self.learning_rate:g}"


# Enumeration order: hidden sizes outer, learning rate inner.
DEFAULT_GRID = tuple(
    GridPoint(hidden, lr) for hidden in ((128,), (128, 64)) for lr in (0.001, 0.0001)
)


@dataclass
class RunRecord:
    """One journal row: a CV fold score or a final test evaluation."""

    kind: str  # "fold" or "final"
    combination: str
    seed: int
    fold: int | None
    grid_point: str
    accuracy: float
    macro_f1: float
    epochs_run: int
    wall_time: float = 0.0  # in-memory only; excluded from the journal

    def journal_line(self) -> str:
        payload = {
            "kind": self.kind,
            "combination": self.combination,
            "seed": self.seed,
            "fold": self.fold,
            "grid_point": self.grid_point,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "epochs_run": self.epochs_run,
        }
        return json.dumps(payload, separators=(",", ":"))


def stratified_kfold(labels, k: int, seed: int) -> np.ndarray:
    """Fold id per sample; per-class fold sizes differ by at most one."""
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < k:
            raise StratificationError(
                f"class {c} has {idx.size} samples, fewer than k={k}"
            )
        rng.shuffle(idx)
        folds[idx] = np.arange(idx.size) % k
    return folds


@dataclass
class FoldScore:
    grid_point: str
    fold: int
    accuracy: float
    macro_f1: float
    epochs_run: int


@dataclass
class GridSearchResult:
    best_point: GridPoint
    best_config: MlpConfig
    best_score: float
    point_means: list[tuple[GridPoint, float]]
    fold_scores: list[FoldScore]


def grid_search(
    X,
    y,
    grid,
    k: int,
    seed: int,
    base_config: MlpConfig | None = None,
    n_classes: int | None = None,
) -> GridSearchResult:
    """Mean CV accuracy per grid point; ties break by enumeration order.

    Folds are computed once from (y, k, seed), so every grid point sees the
    same partition.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("grid must be non-empty")
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    base = base_config if base_config is not None else MlpConfig(seed=seed)
    classes = n_classes if n_classes is not None else int(y.max()) + 1
    folds = stratified_kfold(y, k, seed)

    fold_scores: list[FoldScore] = []
    point_means: list[tuple[GridPoint, float]] = []
    best_point, best_config, best_score = None, None, -np.inf
    for point in grid:
        cfg = replace(
            base, hidden_sizes=point.hidden_sizes, init_learning_rate=point.learning_rate
        )
        accs = []
        for f in range(k):
            train_mask = folds != f
            model = init_mlp(cfg, X.shape[1], classes)
            try:
                fit(model, X[train_mask], y[train_mask])
            except EmbFusionError as exc:
                exc.args = (f"grid point {point.label}, fold {f}: {exc}",)
                raise
            cm = confusion(predict(model, X[~train_mask]), y[~train_mask], classes)
            acc = accuracy(cm)
            accs.append(acc)
            fold_scores.append(
                FoldScore(point.label, f, acc, macro_f1(cm), model.history.epochs_run)
            )
        mean_acc = float(np.mean(accs))
        point_means.append((point, mean_acc))
        if mean_acc > best_score:
            best_point, best_config, best_score = point, cfg, mean_acc
    return GridSearchResult(best_point, best_config, best_score, point_means, fold_scores)


def enumerate_fusion_specs(model_ids, methods=METHODS) -> list[FusionSpec]:
    """Standalone runs plus every pair (and the full set, when >2 sources)
    under every combination method."""
    ids = list(model_ids)
    if not ids:
        raise ConfigError("need at least one model id")
    specs = [FusionSpec(sources=(mid,)) for mid in ids]
    groups = [tuple(pair) for pair in combinations(ids, 2)]
    if len(ids) > 2:
        groups.append(tuple(ids))
    for group in groups:
        for method in methods:
            specs.append(FusionSpec(sources=group, method=method))
    return specs


@dataclass
class ExperimentSpec:
    """Everything a sweep needs: data paths, combinations, grid, protocol."""

    manifest_path: str
    embedding_paths: dict[str, str]
    journal_path: str
    fusion_specs: list[FusionSpec] = field(default_factory=list)
    grid: list[GridPoint] = field(default_factory=lambda: list(DEFAULT_GRID))
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    k_folds: int = 5
    cv_scope: str = "train+dev"  # dev rows merged into train by default
    mlp_defaults: MlpConfig = field(default_factory=MlpConfig)
    label_names: list[str] | None = None

    def __post_init__(self) -> None:
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be non-empty and distinct")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be >= 2")
        if self.cv_scope not in ("train", "train+dev"):
            raise ConfigError(f"cv_scope must be 'train' or 'train+dev', got {self.cv_scope!r}")
        if not self.fusion_specs:
            self.fusion_specs = enumerate_fusion_specs(self.embedding_paths.keys())


def parse_experiment_file(path) -> ExperimentSpec:
    """Load the declarative sweep config (JSON); relative paths resolve
    against the config file's directory."""
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse experiment spec {path}: {exc}") from exc
    for key in ("manifest", "embeddings", "journal"):
        if key not in raw:
            raise ConfigError(f"experiment spec missing {key!r}")

    grid = list(DEFAULT_GRID)
    if "grid" in raw:
        g = raw["grid"]
        grid = [
            GridPoint(tuple(h), lr)
            for h in g.get("hidden_sizes", [[128], [128, 64]])
            for lr in g.get("learning_rates", [0.001, 0.0001])
        ]
    mlp_defaults = MlpConfig(**{k: tuple(v) if k == "hidden_sizes" else v
                                for k, v in raw.get("mlp", {}).items()})
    spec = ExperimentSpec(
        manifest_path=resolve(raw["manifest"]),
        embedding_paths={m: resolve(p) for m, p in raw["embeddings"].items()},
        journal_path=resolve(raw["journal"]),
        grid=grid,
        seeds=tuple(raw.get("seeds", DEFAULT_SEEDS)),
        k_folds=int(raw.get("k_folds", 5)),
        cv_scope=raw.get("cv_scope", "train+dev"),
        mlp_defaults=mlp_defaults,
        label_names=raw.get("label_names"),
    )
    if "combinations" in raw:
        by_name = {fs.combination_name: fs for fs in spec.fusion_specs}
        unknown = [name for name in raw["combinations"] if name not in by_name]
        if unknown:
            raise ConfigError(f"unknown combinations in spec: {unknown}")
        spec.fusion_specs = [by_name[name] for name in raw["combinations"]]
    return spec


class Journal:
    """Append-only JSONL sweep journal with crash-safe resume.

    The first line is a schema header. Each completed cell appends its fold
    lines plus one terminal line ("final" or "error") in a single write, so
    a partial trailing cell can be truncated away on reopen.
    """

    def __init__(self, path, header: dict):
        self.path = path
        self.header = {"kind": "header", "schema": JOURNAL_SCHEMA, **header}
        self.completed: dict[tuple[str, int], list[RunRecord]] = {}
        self.errors: dict[tuple[str, int], str] = {}
        if os.path.exists(path):
            self._resume()
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(self.header, separators=(",", ":")) + "\n")

    def _resume(self) -> None:
        with open(self.path, "rb") as fh:
            data = fh.read()
        lines = data.split(b"\n")
        offset = 0
        keep_until = 0  # byte offset just past the last terminal line
        pending: dict[tuple[str, int], list[RunRecord]] = {}
        header_seen = False
        for raw_line in lines:
            line_end = offset + len(raw_line) + 1
            if raw_line:
                try:
                    obj = json.loads(raw_line.decode("utf-8"))
                except (ValueError, UnicodeDecodeError):
                    break  # torn trailing write; truncate from here
                kind = obj.get("kind")
                if not header_seen:
                    if kind != "header" or obj.get("schema") != JOURNAL_SCHEMA:
                        raise ConfigError(f"{self.path}: unrecognized journal header")
                    for k, v in self.header.items():
                        if obj.get(k) != v:
                            raise ConfigError(
                                f"{self.path}: journal header {k}={obj.get(k)!r} does not "
                                f"match current spec ({v!r}); use a fresh journal"
                            )
                    header_seen = True
                    keep_until = line_end
                elif kind in ("fold", "final"):
                    key = (obj["combination"], obj["seed"])
                    pending.setdefault(key, []).append(
                        RunRecord(
                            kind=kind,
                            combination=obj["combination"],
                            seed=obj["seed"],
                            fold=obj["fold"],
                            grid_point=obj["grid_point"],
                            accuracy=obj["accuracy"],
                            macro_f1=obj["macro_f1"],
                            epochs_run=obj["epochs_run"],
                        )
                    )
                    if kind == "final":
                        self.completed[key] = pending.pop(key)
                        keep_until = line_end
                elif kind == "error":
                    key = (obj["combination"], obj["seed"])
                    pending.pop(key, None)
                    self.errors[key] = obj.get("error", "")
                    keep_until = line_end
                else:
                    raise ConfigError(f"{self.path}: unknown journal line kind {kind!r}")
            offset = line_end
        if not header_seen:
            raise ConfigError(f"{self.path}: journal has no header line")
        if keep_until < len(data):
            with open(self.path, "r+b") as fh:
                fh.truncate(keep_until)

    def is_done(self, key: tuple[str, int]) -> bool:
        return key in self.completed or key in self.errors

    def append_cell(self, key: tuple[str, int], records: list[RunRecord]) -> None:
        text = "".join(r.journal_line() + "\n" for r in records)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        self.completed[key] = list(records)

    def append_error(self, key: tuple[str, int], message: str) -> None:
        line = json.dumps(
            {"kind": "error", "combination": key[0], "seed": key[1], "error": message},
            separators=(",", ":"),
        )
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.errors[key] = message


def load_journal_records(path) -> list[RunRecord]:
    """All fold/final records from a journal (for reporting)."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("kind") in ("fold", "final"):
                records.append(
                    RunRecord(
                        kind=obj["kind"],
                        combination=obj["combination"],
                        seed=obj["seed"],
                        fold=obj["fold"],
                        grid_point=obj["grid_point"],
                        accuracy=obj["accuracy"],
                        macro_f1=obj["macro_f1"],
                        epochs_run=obj["epochs_run"],
                    )
                )
    return records


def _split_ids_labels(manifest: DatasetManifest, splits) -> tuple[list[str], np.ndarray]:
    records = [r for r in manifest.records if r.split in splits]
    return [r.id for r in records], np.array([r.label for r in records], dtype=np.int64)


def _run_cell(
    fspec: FusionSpec,
    seed: int,
    matrices: dict[str, EmbeddingMatrix],
    train_ids: list[str],
    y_train: np.ndarray,
    test_ids: list[str],
    y_test: np.ndarray,
    spec: ExperimentSpec,
    n_classes: int,
) -> list[RunRecord]:
    started = time.monotonic()
    seeded = replace(fspec, seed=seed)
    sources = [matrices[mid] for mid in fspec.sources]
    fused_train = fuse_matrix(align_ids(train_ids, sources), seeded)
    fused_test = fuse_matrix(align_ids(test_ids, sources), seeded)
    name = seeded.combination_name

    base_cfg = replace(spec.mlp_defaults, seed=seed)
    result = grid_search(
        fused_train.rows,
        y_train,
        spec.grid,
        spec.k_folds,
        seed,
        base_config=base_cfg,
        n_classes=n_classes,
    )
    records = [
        RunRecord("fold", name, seed, fs.fold, fs.grid_point, fs.accuracy, fs.macro_f1,
                  fs.epochs_run)
        for fs in result.fold_scores
    ]
    model = init_mlp(result.best_config, fused_train.dim, n_classes)
    fit(model, fused_train.rows, y_train)
    cm = confusion(predict(model, fused_test.rows), y_test, n_classes)
    records.append(
        RunRecord(
            "final",
            name,
            seed,
            None,
            result.best_point.label,
            accuracy(cm),
            macro_f1(cm),
            model.history.epochs_run,
            wall_time=time.monotonic() - started,
        )
    )
    return records


@dataclass
class SweepResult:
    records: list[RunRecord]
    total_cells: int
    computed_cells: int
    cached_cells: int
    failed_cells: int


def run_experiment(
    spec: ExperimentSpec,
    threads: int = 1,
    progress=None,
    on_cell_complete=None,
) -> SweepResult:
    """Run (or resume) every (combination, seed) cell of the sweep.

    Cells are independent; with ``threads > 1`` they are computed on a
    worker pool but journaled in enumeration order, so the journal bytes
    are identical however the sweep is scheduled or interrupted.
    ``on_cell_complete(key)`` fires after each newly computed cell.
    """
    manifest = load_manifest(spec.manifest_path, spec.label_names)
    n_classes = len(manifest.label_names)
    train_splits = ("train", "dev") if spec.cv_scope == "train+dev" else ("train",)
    train_ids, y_train = _split_ids_labels(manifest, train_splits)
    test_ids, y_test = _split_ids_labels(manifest, ("test",))
    matrices = {mid: read_embeddings(p) for mid, p in spec.embedding_paths.items()}

    journal = Journal(
        spec.journal_path,
        {"k_folds": spec.k_folds, "seeds": list(spec.seeds), "cv_scope": spec.cv_scope},
    )
    cells = [(fspec, seed) for fspec in spec.fusion_specs for seed in spec.seeds]
    keys = [(replace(f, seed=s).combination_name, s) for f, s in cells]

    def compute(cell):
        fspec, seed = cell
        return _run_cell(
            fspec, seed, matrices, train_ids, y_train, test_ids, y_test, spec, n_classes
        )

    records: list[RunRecord] = []
    computed = cached = failed = 0

    def handle(key, outcome, error):
        nonlocal computed, cached, failed
        if error is not None:
            journal.append_error(key, error)
            failed += 1
            if progress:
                progress(f"{key[0]} seed={key[1]} ERROR {error}")
            return
        journal.append_cell(key, outcome)
        records.extend(outcome)
        computed += 1
        if progress:
            final = outcome[-1]
            progress(
                f"{key[0]} seed={key[1]} accuracy={final.accuracy:.3f} "
                f"macro_f1={final.macro_f1:.3f}"
            )
        if on_cell_complete:
            on_cell_complete(key)

    todo = []
    for cell, key in zip(cells, keys):
        if journal.is_done(key):
            if key in journal.completed:
                records.extend(journal.completed[key])
                cached += 1
                if progress:
                    progress(f"{key[0]} seed={key[1]} cached")
            else:
                failed += 1
                if progress:
                    progress(f"{key[0]} seed={key[1]} ERROR (cached) {journal.errors[key]}")
        else:
            todo.append((cell, key))

    if threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [(key, pool.submit(compute, cell)) for cell, key in todo]
            for key, future in futures:
                try:
                    handle(key, future.result(), None)
                except EmbFusionError as exc:
                    handle(key, None, str(exc))
    else:
        for cell, key in todo:
            try:
                outcome = compute(cell)
            except EmbFusionError as exc:
                handle(key, None, str(exc))
            else:
                handle(key, outcome, None)

    return SweepResult(
        records=records,
        total_cells=len(cells),
        computed_cells=computed,
        cached_cells=cached,
        failed_cells=failed,
    )


@dataclass
class SummaryRow:
    combination: str
    accuracy_mean: float
    accuracy_std: float
    macro_f1_mean: float
    macro_f1_std: float
    n_seeds: int


def aggregate(records) -> list[SummaryRow]:
    """Per-combination mean/std over seeds of the final test metrics,
    sorted by descending mean accuracy (ties alphabetically)."""
    finals = [r for r in records if r.kind == "final"]
    if not finals:
        raise EmbFusionError("no final records to aggregate")
    by_name: dict[str, list[RunRecord]] = {}
    for r in finals:
        by_name.setdefault(r.combination, []).append(r)
    rows = []
    for name, rs in by_name.items():
        accs = np.array([r.accuracy for r in rs])
        f1s = np.array([r.macro_f1 for r in rs])
        rows.append(
            SummaryRow(
                combination=name,
                accuracy_mean=float(accs.mean()),
                accuracy_std=float(accs.std()),
                macro_f1_mean=float(f1s.mean()),
                macro_f1_std=float(f1s.std()),
                n_seeds=len(rs),
            )
        )
    rows.sort(key=lambda r: (-r.accuracy_mean, r.combination))
    return rows
