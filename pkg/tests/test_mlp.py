import math

import numpy as np
import pytest

from embfusion.errors import (
    ChecksumError,
    ConfigError,
    DegenerateDataError,
    ShapeError,
)
from embfusion.mlp import (
    AdamState,
    MlpConfig,
    adam_step,
    backward,
    cross_entropy,
    fit,
    forward,
    init_adam,
    init_mlp,
    load_model,
    predict,
    predict_proba,
    save_model,
    softmax,
)


def blobs(n=200, margin=2.0, seed=5, dim=2):
    """Two linearly separable Gaussian blobs."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack(
        [
            rng.normal(-margin, 0.5, size=(half, dim)),
            rng.normal(margin, 0.5, size=(n - half, dim)),
        ]
    ).astype(np.float32)
    y = np.array([0] * half + [1] * (n - half))
    order = rng.permutation(n)
    return X[order], y[order]


# ---------------------------------------------------------------------------
# Initialization

def test_init_deterministic():
    cfg = MlpConfig(seed=3)
    m1 = init_mlp(cfg, 10, 3)
    m2 = init_mlp(cfg, 10, 3)
    for a, b in zip(m1.weights + m1.biases, m2.weights + m2.biases):
        assert a.tobytes() == b.tobytes()


def test_init_shape_chain():
    model = init_mlp(MlpConfig(hidden_sizes=(128, 64)), 2304, 3)
    assert [w.shape for w in model.weights] == [(2304, 128), (128, 64), (64, 3)]
    assert [b.shape for b in model.biases] == [(128,), (64,), (3,)]


def test_init_within_glorot_bound():
    model = init_mlp(MlpConfig(hidden_sizes=(16, 8), seed=1), 20, 4)
    sizes = (20, 16, 8, 4)
    for W, fan_in, fan_out in zip(model.weights, sizes[:-1], sizes[1:]):
        assert np.abs(W).max() <= math.sqrt(6.0 / (fan_in + fan_out))
        assert np.abs(W).max() > 0


def test_init_biases_zero():
    model = init_mlp(MlpConfig(), 4, 2)
    for b in model.biases:
        assert not b.any()


# ---------------------------------------------------------------------------
# Forward pass

def test_zero_model_uniform_probs():
    model = init_mlp(MlpConfig(hidden_sizes=(5,)), 3, 4)
    for W in model.weights:
        W[...] = 0.0
    probs = forward(model, np.zeros((6, 3), dtype=np.float32))
    np.testing.assert_allclose(probs, 0.25, atol=1e-7)


def test_rows_sum_to_one():
    rng = np.random.default_rng(51)
    model = init_mlp(MlpConfig(hidden_sizes=(8,), seed=2), 5, 3)
    probs = forward(model, rng.standard_normal((40, 5)).astype(np.float32))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(52)
    logits = rng.standard_normal((10, 4))
    shifted = logits + rng.standard_normal((10, 1))
    np.testing.assert_allclose(softmax(logits), softmax(shifted), atol=1e-12)


def test_output_bias_shift_leaves_probs():
    rng = np.random.default_rng(53)
    X = rng.standard_normal((7, 4)).astype(np.float32)
    m1 = init_mlp(MlpConfig(hidden_sizes=(6,), seed=9), 4, 3)
    m2 = init_mlp(MlpConfig(hidden_sizes=(6,), seed=9), 4, 3)
    m2.biases[-1] += 3.5  # constant shift of every row's logits
    np.testing.assert_allclose(forward(m1, X), forward(m2, X), atol=1e-5)


def test_forward_shape_error():
    model = init_mlp(MlpConfig(), 4, 2)
    with pytest.raises(ShapeError):
        forward(model, np.zeros((3, 5), dtype=np.float32))


# ---------------------------------------------------------------------------
# Cross-entropy

def test_uniform_two_class_is_ln2():
    probs = np.full((4, 2), 0.5)
    assert cross_entropy(probs, [0, 1, 0, 1]) == pytest.approx(math.log(2), abs=1e-12)


def test_perfect_prediction_zero_loss():
    probs = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert cross_entropy(probs, [0, 1]) == 0.0


def test_hand_computed_loss():
    probs = np.array([[0.7, 0.3], [0.2, 0.8]])
    expected = -(math.log(0.7) + math.log(0.8)) / 2
    assert cross_entropy(probs, [0, 1]) == pytest.approx(expected, abs=1e-12)
    assert cross_entropy(probs, [0, 1]) == pytest.approx(0.2899, abs=1e-4)


# ---------------------------------------------------------------------------
# Backpropagation vs central finite differences (float64 mode)

def fd_gradients(model, X, y, h=1e-4):
    """Central-difference loss gradients, parameter by parameter."""
    grads = []
    for param in model.weights + model.biases:
        g = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = param[idx]
            param[idx] = orig + h
            lo_plus = cross_entropy(forward(model, X), y)
            param[idx] = orig - h
            lo_minus = cross_entropy(forward(model, X), y)
            param[idx] = orig
            g[idx] = (lo_plus - lo_minus) / (2 * h)
            it.iternext()
        grads.append(g)
    return grads


def relative_error(a, b):
    return np.abs(a - b) / (np.abs(a) + 1e-8)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(54)
    for arch in [(4,), (5, 4)]:
        cfg = MlpConfig(hidden_sizes=arch, dtype="float64", seed=7)
        model = init_mlp(cfg, 5, 3)
        X = rng.standard_normal((8, 5))
        y = rng.integers(0, 3, size=8)
        analytic = backward(model, X, y)
        analytic_flat = analytic[0] + analytic[1]
        numeric = fd_gradients(model, X, y)
        for a, n in zip(analytic_flat, numeric):
            assert relative_error(a, n).max() < 1e-4


def test_gradient_closed_form_at_zero_point():
    model = init_mlp(MlpConfig(hidden_sizes=(4,), dtype="float64"), 3, 2)
    for W in model.weights:
        W[...] = 0.0
    X = np.zeros((6, 3))
    y = np.array([0, 0, 0, 1, 1, 1])
    grads_w, grads_b = backward(model, X, y)
    onehot = np.eye(2)[y]
    expected_bias = (np.full((6, 2), 0.5) - onehot).mean(axis=0)
    np.testing.assert_allclose(grads_b[-1], expected_bias, atol=1e-12)
    for g in grads_w:
        np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_duplicated_batch_same_mean_gradient():
    rng = np.random.default_rng(55)
    model = init_mlp(MlpConfig(hidden_sizes=(6,), dtype="float64", seed=8), 4, 3)
    X = rng.standard_normal((10, 4))
    y = rng.integers(0, 3, size=10)
    g1 = backward(model, X, y)
    g2 = backward(model, np.vstack([X, X]), np.concatenate([y, y]))
    for a, b in zip(g1[0] + g1[1], g2[0] + g2[1]):
        np.testing.assert_allclose(a, b, atol=1e-12)


# ---------------------------------------------------------------------------
# Adam

def test_first_step_magnitude_is_lr():
    theta = [np.array([0.0])]
    state = init_adam(theta)
    adam_step(theta, [np.array([1.0])], state, lr=0.001)
    assert theta[0][0] == pytest.approx(-0.001, abs=1e-6)
    assert theta[0][0] > -0.001  # epsilon shaves a hair off


def test_zero_gradient_never_moves():
    theta = [np.array([1.5, -2.0])]
    state = init_adam(theta)
    for _ in range(25):
        adam_step(theta, [np.zeros(2)], state, lr=0.1)
    np.testing.assert_array_equal(theta[0], [1.5, -2.0])


def scalar_adam_trace(theta0, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """Hand-rolled scalar Adam on f(theta) = theta^2 / 2 (gradient = theta)."""
    theta, m, v = theta0, 0.0, 0.0
    trace = []
    for t in range(1, steps + 1):
        g = theta
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
        trace.append(theta)
    return trace


def test_adam_matches_scalar_trace():
    theta = [np.array([1.0])]
    state = init_adam(theta)
    expected = scalar_adam_trace(1.0, lr=0.1, steps=10)
    for step_value in expected:
        adam_step(theta, [theta[0].copy()], state, lr=0.1)
        assert theta[0][0] == pytest.approx(step_value, abs=1e-12)


# ---------------------------------------------------------------------------
# fit / predict

def test_fit_separable_blobs_perfect_and_early():
    X, y = blobs()
    cfg = MlpConfig(hidden_sizes=(16,), seed=3, max_epochs=500, batch_size=32)
    model = fit(init_mlp(cfg, X.shape[1], 2), X, y)
    assert (predict(model, X) == y).mean() == 1.0
    assert model.history.epochs_run < cfg.max_epochs
    assert model.history.stopped_early


def test_fit_shuffled_labels_near_chance():
    rng = np.random.default_rng(56)
    X, y = blobs(n=300, seed=6)
    y = rng.permutation(y)
    cfg = MlpConfig(hidden_sizes=(16,), seed=3, max_epochs=200)
    model = fit(init_mlp(cfg, X.shape[1], 2), X, y)
    val = model.history.val_accuracy[model.history.best_epoch]
    assert abs(val - 0.5) <= 0.1 + 0.17  # chance plus small-validation noise


def test_fit_deterministic():
    X, y = blobs(n=120, seed=7)
    cfg = MlpConfig(hidden_sizes=(8,), seed=42, max_epochs=60)
    m1 = fit(init_mlp(cfg, 2, 2), X, y)
    m2 = fit(init_mlp(cfg, 2, 2), X, y)
    assert m1.history.train_loss == m2.history.train_loss
    assert m1.history.val_accuracy == m2.history.val_accuracy
    for a, b in zip(m1.weights + m1.biases, m2.weights + m2.biases):
        assert a.tobytes() == b.tobytes()


def test_fit_restores_best_epoch_snapshot():
    X, y = blobs(n=150, seed=8)
    cfg = MlpConfig(hidden_sizes=(8,), seed=11, max_epochs=100)
    model = fit(init_mlp(cfg, 2, 2), X, y)
    hist = model.history
    assert hist.val_accuracy[hist.best_epoch] == max(hist.val_accuracy)


def test_fit_single_class_rejected():
    X = np.zeros((10, 2), dtype=np.float32)
    with pytest.raises(DegenerateDataError):
        fit(init_mlp(MlpConfig(), 2, 2), X, np.zeros(10, dtype=int))


def test_loss_decreases_under_small_lr():
    # full-batch steps at lr=1e-4: a couple of Adam transients allowed,
    # final loss at least 10% below the initial
    rng = np.random.default_rng(58)
    X = np.vstack(
        [rng.normal(-10, 2.5, size=(60, 2)), rng.normal(10, 2.5, size=(60, 2))]
    ).astype(np.float32)
    y = np.array([0] * 60 + [1] * 60)
    cfg = MlpConfig(
        hidden_sizes=(64, 32),
        init_learning_rate=1e-4,
        batch_size=len(X),
        max_epochs=50,
        patience_epochs=50,
        validation_fraction=0.05,
        seed=2,
    )
    model = fit(init_mlp(cfg, 2, 2), X, y)
    losses = model.history.train_loss
    violations = sum(1 for a, b in zip(losses, losses[1:]) if b > a + 1e-12)
    assert violations <= 2
    assert losses[-1] < losses[0] * 0.9


def test_predict_is_argmax_and_ties_go_low():
    rng = np.random.default_rng(57)
    model = init_mlp(MlpConfig(hidden_sizes=(6,), seed=4), 5, 3)
    X = rng.standard_normal((30, 5)).astype(np.float32)
    np.testing.assert_array_equal(
        predict(model, X), np.argmax(predict_proba(model, X), axis=1)
    )
    # all-zero weights give uniform rows; ties resolve to class 0
    for W in model.weights:
        W[...] = 0.0
    for b in model.biases:
        b[...] = 0.0
    np.testing.assert_array_equal(predict(model, X), 0)


def test_adaptive_schedule_divides_lr():
    # with an absurd flat task the schedule must kick in without crashing
    X, y = blobs(n=60, seed=10)
    cfg = MlpConfig(
        hidden_sizes=(4,),
        lr_schedule="adaptive",
        seed=5,
        max_epochs=40,
        patience_epochs=12,
    )
    model = fit(init_mlp(cfg, 2, 2), X, y)
    assert model.history.epochs_run >= 1


def test_config_validation():
    with pytest.raises(ConfigError):
        MlpConfig(validation_fraction=0.0)
    with pytest.raises(ConfigError):
        MlpConfig(hidden_sizes=(0,))
    with pytest.raises(ConfigError):
        MlpConfig(init_learning_rate=-1.0)
    with pytest.raises(ConfigError):
        MlpConfig(activation="tanh")


# ---------------------------------------------------------------------------
# Serialization

def test_save_load_round_trip(tmp_path):
    X, y = blobs(n=80, seed=12)
    cfg = MlpConfig(hidden_sizes=(8,), seed=1, max_epochs=30)
    model = fit(init_mlp(cfg, 2, 2), X, y)
    path = tmp_path / "model.bin"
    save_model(path, model)
    back = load_model(path)
    assert back.config == model.config
    assert back.input_dim == model.input_dim and back.n_classes == model.n_classes
    for a, b in zip(model.weights + model.biases, back.weights + back.biases):
        assert a.astype(np.float32).tobytes() == b.tobytes()
    np.testing.assert_array_equal(predict(back, X), predict(model, X))


def test_model_blob_crc_detects_corruption(tmp_path):
    model = init_mlp(MlpConfig(hidden_sizes=(4,), seed=1), 3, 2)
    path = tmp_path / "model.bin"
    save_model(path, model)
    data = bytearray(path.read_bytes())
    data[-8] ^= 0x01
    path.write_bytes(bytes(data))
    with pytest.raises(ChecksumError):
        load_model(path)
