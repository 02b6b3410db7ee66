"""From-scratch multi-layer perceptron classifier.

ReLU hidden layers, softmax output, multinomial log-loss, Adam updates,
and early stopping on a stratified held-out validation slice. Everything
is driven by seeded generators, so (seed, data, config) fixes the trained
parameters bit for bit.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    ChecksumError,
    ConfigError,
    DegenerateDataError,
    FormatError,
    ShapeError,
    VersionError,
)

MODEL_MAGIC = b"EFNN"
MODEL_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple[int, ...] = (128,)
    activation: str = "relu"
    init_learning_rate: float = 0.001
    lr_schedule: str = "constant"  # "constant" or "adaptive" (divide by 5 on plateau)
    lr_divisor: float = 5.0
    lr_patience: int = 2
    validation_fraction: float = 0.1
    patience_epochs: int = 10
    tol: float = 1e-4
    max_epochs: int = 10000
    batch_size: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    dtype: str = "float32"  # "float64" for finite-difference checking

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h <= 0 for h in self.hidden_sizes):
            raise ConfigError(f"hidden sizes must be positive: {self.hidden_sizes}")
        if self.activation != "relu":
            raise ConfigError("only relu hidden activation is supported")
        if self.init_learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.lr_schedule not in ("constant", "adaptive"):
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        if not 0 < self.validation_fraction < 1:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0
    stopped_early: bool = False


@dataclass
class MlpModel:
    config: MlpConfig
    input_dim: int
    n_classes: int
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    history: TrainingHistory = field(default_factory=TrainingHistory)


def _seed_streams(seed: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def init_mlp(config: MlpConfig, input_dim: int, n_classes: int) -> MlpModel:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    if input_dim < 1 or n_classes < 2:
        raise ConfigError(f"need input_dim >= 1 and n_classes >= 2, got {input_dim}, {n_classes}")
    rng = _seed_streams(config.seed)[0]
    dtype = config.np_dtype
    sizes = (input_dim, *config.hidden_sizes, n_classes)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return MlpModel(config, input_dim, n_classes, weights, biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable row-wise softmax (max-subtraction)."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def _check_input(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=model.config.np_dtype)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeError(f"expected (n, {model.input_dim}) input, got {X.shape}")
    return X


def _forward_full(model: MlpModel, X: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Returns ([input, hidden activations...], probabilities)."""
    acts = [X]
    h = X
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    logits = h @ model.weights[-1] + model.biases[-1]
    return acts, softmax(logits)


def forward(model: MlpModel, X) -> np.ndarray:
    """Class probability rows; each sums to 1."""
    return _forward_full(model, _check_input(model, X))[1]


def cross_entropy(probs, labels) -> float:
    """Mean negative log-probability of the true class, clamped at 1e-12."""
    probs = np.asarray(probs)
    labels = np.asarray(labels, dtype=np.int64)
    picked = probs[np.arange(labels.shape[0]), labels]
    return float(-np.log(np.maximum(picked, 1e-12)).mean())


def _backprop(
    model: MlpModel, acts: list[np.ndarray], probs: np.ndarray, labels: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    n = probs.shape[0]
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads_w: list[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * len(model.biases)  # type: ignore[list-item]
    for layer in range(len(model.weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (acts[layer] > 0)
    return grads_w, grads_b


def backward(model: MlpModel, X, labels) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of the mean cross-entropy w.r.t. every weight and bias."""
    X = _check_input(model, X)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != X.shape[0]:
        raise ShapeError(f"{labels.shape[0]} labels for {X.shape[0]} rows")
    acts, probs = _forward_full(model, X)
    return _backprop(model, acts, probs, labels)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def init_adam(params: list[np.ndarray]) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, applied to params in place."""
    state.t += 1
    t = state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + epsilon)


def _stratified_holdout(
    y: np.ndarray, fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class split keeping at least one sample on each side when possible."""
    val_idx: list[np.ndarray] = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if idx.size < 2:
            continue
        n_val = int(np.floor(fraction * idx.size + 0.5))
        n_val = min(max(n_val, 1), idx.size - 1)
        rng.shuffle(idx)
        val_idx.append(idx[:n_val])
    val = np.sort(np.concatenate(val_idx)) if val_idx else np.empty(0, dtype=np.int64)
    mask = np.ones(y.shape[0], dtype=bool)
    mask[val] = False
    return np.flatnonzero(mask), val


def fit(model: MlpModel, X, y) -> MlpModel:
    """Train with Adam, mini-batches, and early stopping on validation accuracy.

    Splits off ``validation_fraction`` (stratified, seeded), shuffles each
    epoch, stops after ``patience_epochs`` epochs without a >= tol
    improvement, and restores the best validation snapshot.
    """
    cfg = model.config
    X = _check_input(model, X)
    y = np.asarray(y, dtype=np.int64)
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"{y.shape[0]} labels for {X.shape[0]} rows")
    if np.unique(y).size < 2:
        raise DegenerateDataError("training data has fewer than two classes")

    _, split_rng, shuffle_rng = _seed_streams(cfg.seed)
    train_idx, val_idx = _stratified_holdout(y, cfg.validation_fraction, split_rng)
    X_train, y_train = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    params = model.weights + model.biases
    state = init_adam(params)
    lr = cfg.init_learning_rate
    history = model.history = TrainingHistory()

    best_val = -np.inf
    best_params = [p.copy() for p in params]
    no_improve = 0
    lr_no_improve = 0

    n = X_train.shape[0]
    batch = min(cfg.batch_size, n)
    for epoch in range(cfg.max_epochs):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            yb = y_train[idx]
            acts, probs = _forward_full(model, X_train[idx])
            loss_sum += cross_entropy(probs, yb) * idx.shape[0]
            grads_w, grads_b = _backprop(model, acts, probs, yb)
            adam_step(params, grads_w + grads_b, state, lr, cfg.beta1, cfg.beta2, cfg.epsilon)
        history.train_loss.append(loss_sum / n)

        val_acc = float((predict(model, X_val) == y_val).mean()) if y_val.size else 1.0
        history.val_accuracy.append(val_acc)
        history.epochs_run = epoch + 1

        improved = best_val == -np.inf or val_acc - best_val >= cfg.tol
        if val_acc >= best_val:
            # ties update too: among equally good epochs, keep the most trained
            best_val = val_acc
            best_params = [p.copy() for p in params]
            history.best_epoch = epoch
        if improved:
            no_improve = 0
            lr_no_improve = 0
        else:
            no_improve += 1
            lr_no_improve += 1
            if cfg.lr_schedule == "adaptive" and lr_no_improve >= cfg.lr_patience:
                lr /= cfg.lr_divisor
                lr_no_improve = 0
        if no_improve >= cfg.patience_epochs:
            history.stopped_early = True
            break

    for p, bp in zip(params, best_params):
        p[...] = bp
    return model


def predict_proba(model: MlpModel, X) -> np.ndarray:
    return forward(model, X)


def predict(model: MlpModel, X) -> np.ndarray:
    """Argmax class per row; ties break toward the lowest class index."""
    return np.argmax(predict_proba(model, X), axis=1)


def save_model(path, model: MlpModel) -> None:
    """Versioned binary blob: shapes + f32 parameters + config echo + CRC-32."""
    cfg_json = json.dumps(asdict(model.config), sort_keys=True).encode("utf-8")
    parts = [
        MODEL_MAGIC,
        struct.pack("<H", MODEL_VERSION),
        struct.pack("<I", len(cfg_json)),
        cfg_json,
        struct.pack("<III", model.input_dim, model.n_classes, len(model.weights)),
    ]
    for W, b in zip(model.weights, model.biases):
        parts.append(struct.pack("<II", W.shape[0], W.shape[1]))
        parts.append(np.ascontiguousarray(W, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    body = b"".join(parts)
    crc = zlib.crc32(body[len(MODEL_MAGIC):]) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", crc))


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model blob")
    (version,) = struct.unpack_from("<H", data, 4)
    if version > MODEL_VERSION:
        raise VersionError(f"{path}: model version {version} unsupported")
    (stored,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[4:-4]) & 0xFFFFFFFF != stored:
        raise ChecksumError(f"{path}: CRC mismatch")
    off = 6
    (cfg_len,) = struct.unpack_from("<I", data, off)
    off += 4
    cfg_dict = json.loads(data[off : off + cfg_len].decode("utf-8"))
    cfg_dict["hidden_sizes"] = tuple(cfg_dict["hidden_sizes"])
    config = MlpConfig(**cfg_dict)
    off += cfg_len
    input_dim, n_classes, n_layers = struct.unpack_from("<III", data, off)
    off += 12
    weights, biases = [], []
    for _ in range(n_layers):
        fan_in, fan_out = struct.unpack_from("<II", data, off)
        off += 8
        w_bytes = fan_in * fan_out * 4
        weights.append(
            np.frombuffer(data, dtype="<f4", count=fan_in * fan_out, offset=off)
            .reshape(fan_in, fan_out)
            .astype(np.float32)
        )
        off += w_bytes
        biases.append(
            np.frombuffer(data, dtype="<f4", count=fan_out, offset=off).astype(np.float32)
        )
        off += fan_out * 4
    return MlpModel(config, input_dim, n_classes, weights, biases)
