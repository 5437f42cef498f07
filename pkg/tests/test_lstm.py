import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpensemble.errors import ShapeMismatch
from dpensemble.lstm import (LstmParams, backward, forward, init_params, n_params, predict,
                             predict_batch, sgd_segment)

SMALL = (4, 4)


def straight_line(theta, hidden, window, mask=None, out_tanh=True):
    """Plain numpy LSTM written from the documented flat layout."""
    n1, n2 = hidden
    sig = lambda z: 1.0 / (1.0 + np.exp(-z))
    off = 0

    def take(*shape):
        nonlocal off
        size = int(np.prod(shape))
        out = theta[off:off + size].reshape(shape)
        off += size
        return out

    W1, U1, b1 = take(4 * n1, 1), take(4 * n1, n1), take(4 * n1)
    W2, U2, b2 = take(4 * n2, n1), take(4 * n2, n2), take(4 * n2)
    dw, db = take(n2), take(1)

    def run(xs, W, U, b, n):
        h, c, hs = np.zeros(n), np.zeros(n), []
        for x in xs:
            z = W @ x + U @ h + b
            i, f, g, o = sig(z[:n]), sig(z[n:2 * n]), np.tanh(z[2 * n:3 * n]), sig(z[3 * n:])
            c = f * c + i * g
            h = o * np.tanh(c)
            hs.append(h)
        return np.array(hs)

    h1 = run(np.asarray(window)[:, None], W1, U1, b1, n1)
    if mask is not None:
        h1 = h1 * mask
    h2 = run(h1, W2, U2, b2, n2)
    y = dw @ h2[-1] + db[0]
    return np.tanh(y) if out_tanh else y


def small_net(seed, act="tanh", dropout=0.2):
    return init_params(np.random.default_rng(seed), SMALL, 7, dropout, act, scale=0.5)


def test_zero_network_predicts_activation_of_zero():
    for act in ("tanh", "identity"):
        params = LstmParams(np.zeros(n_params((32, 16))), output_activation=act)
        assert predict(params, np.linspace(0, 1, 7)) == 0.0


def test_eval_mode_is_pure():
    params = init_params(np.random.default_rng(0))
    w = np.random.default_rng(1).random(7)
    assert predict(params, w) == predict(params, w)
    pred, cache = forward(params, w, mode="eval")
    assert pred == predict(params, w)
    assert (cache.mask == 1).all()


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("act", ["tanh", "identity"])
def test_matches_straight_line_oracle(seed, act):
    params = small_net(seed, act)
    w = np.random.default_rng(seed + 100).random(7)
    ref = straight_line(params.theta, SMALL, w, out_tanh=act == "tanh")
    assert abs(predict(params, w) - ref) <= 1e-12


def test_train_mode_with_mask_matches_oracle():
    params = small_net(3)
    rng = np.random.default_rng(4)
    w = rng.random(7)
    mask = (rng.random((7, 4)) >= 0.2) / 0.8
    pred, _ = forward(params, w, mode="train", mask=mask)
    assert abs(pred - straight_line(params.theta, SMALL, w, mask)) <= 1e-12


def test_default_size_matches_oracle():
    params = init_params(np.random.default_rng(9))
    w = np.random.default_rng(10).random(7)
    assert abs(predict(params, w) - straight_line(params.theta, (32, 16), w)) <= 1e-12


def test_predict_batch_matches_single():
    params = small_net(2)
    X = np.random.default_rng(5).random((20, 7))
    batch = predict_batch(params, X)
    assert batch.tolist() == [predict(params, x) for x in X]


def test_shape_mismatch():
    params = small_net(0)
    with pytest.raises(ShapeMismatch):
        predict(params, np.zeros(6))
    with pytest.raises(ShapeMismatch):
        LstmParams(np.zeros(10), SMALL)
    with pytest.raises(ShapeMismatch):
        forward(params, np.zeros(7), mode="train", mask=np.ones((7, 3)))


def test_train_mode_needs_randomness():
    with pytest.raises(ValueError):
        forward(small_net(0), np.zeros(7), mode="train")


def loss(params, theta, w, mask, target):
    pred, _ = forward(params.like(theta), w, mode="train", mask=mask)
    return (pred - target) ** 2


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-6)


def fd_gradient(params, w, mask, target, step=1e-5):
    theta = params.theta
    g = np.empty_like(theta)
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += step
        tm[k] -= step
        g[k] = (loss(params, tp, w, mask, target) - loss(params, tm, w, mask, target)) / (2 * step)
    return g


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(1000 + seed)
    act = "tanh" if seed % 2 == 0 else "identity"
    params = small_net(seed, act)
    w, target = rng.random(7), rng.random()
    mask = (rng.random((7, 4)) >= 0.2) / 0.8
    _, cache = forward(params, w, mode="train", mask=mask)
    grad = backward(cache, target, params).theta
    assert rel_err(grad, fd_gradient(params, w, mask, target)).max() <= 1e-4


def test_zero_loss_derivative_gives_zero_gradient():
    params = small_net(1)
    w = np.random.default_rng(2).random(7)
    pred, cache = forward(params, w, mode="train", rng=np.random.default_rng(3))
    assert not backward(cache, pred, params).theta.any()


def test_loss_scale_doubles_gradient():
    params = small_net(4)
    _, cache = forward(params, np.random.default_rng(5).random(7), mode="train",
                       rng=np.random.default_rng(6))
    g1 = backward(cache, 0.3, params).theta
    g2 = backward(cache, 0.3, params, loss_scale=2.0).theta
    assert (g2 == 2.0 * g1).all()


def test_sgd_segment_matches_manual_steps():
    params = small_net(7)
    rng = np.random.default_rng(8)
    X, y = rng.random((5, 7)), rng.random(5)
    rows = np.array([0, 3, 3, 1])
    masks = (rng.random((4, 7, 4)) >= 0.2) / 0.8
    manual = params.copy()
    for r, m in zip(rows, masks):
        _, cache = forward(manual, X[r], mode="train", mask=m)
        manual = manual.like(manual.theta - 0.01 * backward(cache, y[r], manual).theta)
    losses, failed = sgd_segment(params, X, y, rows, masks, 0.01)
    assert failed == -1 and len(losses) == 4
    np.testing.assert_allclose(params.theta, manual.theta, rtol=0, atol=1e-14)


def test_sgd_segment_reports_divergence():
    params = small_net(0, "identity")
    X, y = np.ones((1, 7)), np.array([1e200])
    _, failed = sgd_segment(params, X, y, np.zeros(10, dtype=np.int64), np.ones((10, 7, 4)), 1e10)
    assert failed >= 0


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_predictions_bounded_with_tanh(seed):
    params = init_params(np.random.default_rng(seed), SMALL, 7, scale=3.0)
    assert -1.0 <= predict(params, np.random.default_rng(seed).random(7)) <= 1.0
