"""Two-layer LSTM one-step regressor with exact backpropagation through time.

Architecture for a window ``x_1..x_b`` (one scalar per step)::

    LSTM(1 -> n1) -> inverted dropout (train only) -> LSTM(n1 -> n2)
        -> dense(n2 -> 1) on the last hidden state -> tanh -> identity

Each LSTM layer uses the standard gates (order i, f, g, o)::

    z_t = W x_t + U h_{t-1} + bias
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
    c_t = f * c_{t-1} + i * g;  h_t = o * tanh(c_t)

All parameters live in one flat float64 vector. Layout, in order: layer 1
``W (4*n1, 1)``, ``U (4*n1, n1)``, ``bias (4*n1)``; layer 2 ``W (4*n2, n1)``,
``U (4*n2, n2)``, ``bias (4*n2)``; dense weights ``(n2,)`` then dense bias.
Matrices are row-major.

The kernels are plain loops compiled with numba; they avoid BLAS so that
results do not depend on threading or library builds.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ShapeMismatch

ACTIVATIONS = ("tanh", "identity")


def layer_sizes(n_in, n):
    return 4 * n * n_in, 4 * n * n, 4 * n


def n_params(hidden, n_in=1):
    n1, n2 = hidden
    return sum(layer_sizes(n_in, n1)) + sum(layer_sizes(n1, n2)) + n2 + 1


@dataclass
class LstmParams:
    theta: np.ndarray
    hidden: tuple = (32, 16)
    lag: int = 7
    dropout: float = 0.2
    output_activation: str = "tanh"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise ShapeMismatch(f"need two positive hidden sizes, got {self.hidden}")
        if self.theta.ndim != 1 or self.theta.size != n_params(self.hidden):
            raise ShapeMismatch(
                f"parameter vector has {self.theta.size} entries, hidden sizes {self.hidden} "
                f"need {n_params(self.hidden)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.output_activation not in ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    def layers(self):
        """``[(W, U, bias), (W, U, bias)]`` as views into ``theta``."""
        out, off, n_in = [], 0, 1
        for n in self.hidden:
            sw, su, sb = layer_sizes(n_in, n)
            W = self.theta[off:off + sw].reshape(4 * n, n_in)
            U = self.theta[off + sw:off + sw + su].reshape(4 * n, n)
            b = self.theta[off + sw + su:off + sw + su + sb]
            out.append((W, U, b))
            off += sw + su + sb
            n_in = n
        return out

    @property
    def dense(self):
        n2 = self.hidden[1]
        return self.theta[-n2 - 1:-1], self.theta[-1:]

    def like(self, theta):
        return LstmParams(theta, self.hidden, self.lag, self.dropout, self.output_activation)

    def copy(self):
        return self.like(self.theta.copy())

    def all_finite(self):
        return bool(np.isfinite(self.theta).all())


def init_params(rng, hidden=(32, 16), lag=7, dropout=0.2, output_activation="tanh", scale=0.5):
    theta = rng.uniform(-scale, scale, size=n_params(hidden))
    return LstmParams(theta, hidden, lag, dropout, output_activation)


# --- kernels -----------------------------------------------------------------

@njit(cache=True)
def _sigmoid(z):
    if z >= 0.0:
        e = math.exp(-z)
        return 1.0 / (1.0 + e)
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def _layer_forward(theta, off, n_in, n, xs, gates, cs, hs, tcs):
    T = xs.shape[0]
    u_off = off + 4 * n * n_in
    b_off = u_off + 4 * n * n
    for k in range(n):
        cs[0, k] = 0.0
        hs[0, k] = 0.0
    for t in range(T):
        for r in range(4 * n):
            z = theta[b_off + r]
            base = off + r * n_in
            for c in range(n_in):
                z += theta[base + c] * xs[t, c]
            base = u_off + r * n
            for c in range(n):
                z += theta[base + c] * hs[t, c]
            if 2 * n <= r < 3 * n:
                gates[t, r] = math.tanh(z)
            else:
                gates[t, r] = _sigmoid(z)
        for k in range(n):
            c_new = gates[t, n + k] * cs[t, k] + gates[t, k] * gates[t, 2 * n + k]
            cs[t + 1, k] = c_new
            tc = math.tanh(c_new)
            tcs[t, k] = tc
            hs[t + 1, k] = gates[t, 3 * n + k] * tc
    return b_off + 4 * n


@njit(cache=True)
def _layer_backward(theta, grad, off, n_in, n, xs, gates, cs, hs, tcs, dh_ext, dxs):
    T = xs.shape[0]
    u_off = off + 4 * n * n_in
    b_off = u_off + 4 * n * n
    dh_next = np.zeros(n)
    dc_next = np.zeros(n)
    dz = np.empty(4 * n)
    for t in range(T - 1, -1, -1):
        for k in range(n):
            dh = dh_ext[t, k] + dh_next[k]
            i = gates[t, k]
            f = gates[t, n + k]
            g = gates[t, 2 * n + k]
            o = gates[t, 3 * n + k]
            tc = tcs[t, k]
            dc = dc_next[k] + dh * o * (1.0 - tc * tc)
            dz[k] = dc * g * i * (1.0 - i)
            dz[n + k] = dc * cs[t, k] * f * (1.0 - f)
            dz[2 * n + k] = dc * i * (1.0 - g * g)
            dz[3 * n + k] = dh * tc * o * (1.0 - o)
            dc_next[k] = dc * f
        for c in range(n_in):
            dxs[t, c] = 0.0
        for k in range(n):
            dh_next[k] = 0.0
        for r in range(4 * n):
            d = dz[r]
            grad[b_off + r] += d
            base = off + r * n_in
            for c in range(n_in):
                grad[base + c] += d * xs[t, c]
                dxs[t, c] += theta[base + c] * d
            base = u_off + r * n
            for c in range(n):
                grad[base + c] += d * hs[t, c]
                dh_next[c] += theta[base + c] * d


@njit(cache=True)
def _forward(theta, n1, n2, x, mask, out_tanh, xs, g1, c1, h1, tc1, d1, g2, c2, h2, tc2):
    T = x.shape[0]
    for t in range(T):
        xs[t, 0] = x[t]
    off2 = _layer_forward(theta, 0, 1, n1, xs, g1, c1, h1, tc1)
    for t in range(T):
        for k in range(n1):
            d1[t, k] = h1[t + 1, k] * mask[t, k]
    off3 = _layer_forward(theta, off2, n1, n2, d1, g2, c2, h2, tc2)
    a = theta[off3 + n2]
    for k in range(n2):
        a += theta[off3 + k] * h2[T, k]
    if out_tanh:
        return math.tanh(a)
    return a


@njit(cache=True)
def _backward(theta, n1, n2, mask, out_tanh, pred, dpred, xs, g1, c1, h1, tc1, d1,
              g2, c2, h2, tc2, grad, dh2, dd1, dh1, dx):
    T = xs.shape[0]
    off2 = 4 * n1 * (1 + n1 + 1)
    off3 = off2 + 4 * n2 * (n1 + n2 + 1)
    for q in range(grad.shape[0]):
        grad[q] = 0.0
    if out_tanh:
        da = dpred * (1.0 - pred * pred)
    else:
        da = dpred
    grad[off3 + n2] = da
    for t in range(T):
        for k in range(n2):
            dh2[t, k] = 0.0
    for k in range(n2):
        grad[off3 + k] = da * h2[T, k]
        dh2[T - 1, k] = da * theta[off3 + k]
    _layer_backward(theta, grad, off2, n1, n2, d1, g2, c2, h2, tc2, dh2, dd1)
    for t in range(T):
        for k in range(n1):
            dh1[t, k] = dd1[t, k] * mask[t, k]
    _layer_backward(theta, grad, 0, 1, n1, xs, g1, c1, h1, tc1, dh1, dx)


@njit(cache=True)
def _train_segment(theta, n1, n2, X, y, rows, masks, lr, out_tanh, losses):
    """Plain SGD over ``rows``; returns the failing iteration or -1."""
    T = X.shape[1]
    xs = np.empty((T, 1))
    g1 = np.empty((T, 4 * n1))
    c1 = np.empty((T + 1, n1))
    h1 = np.empty((T + 1, n1))
    tc1 = np.empty((T, n1))
    d1 = np.empty((T, n1))
    g2 = np.empty((T, 4 * n2))
    c2 = np.empty((T + 1, n2))
    h2 = np.empty((T + 1, n2))
    tc2 = np.empty((T, n2))
    grad = np.empty(theta.shape[0])
    dh2 = np.empty((T, n2))
    dd1 = np.empty((T, n1))
    dh1 = np.empty((T, n1))
    dx = np.empty((T, 1))
    for it in range(rows.shape[0]):
        r = rows[it]
        mask = masks[it]
        pred = _forward(theta, n1, n2, X[r], mask, out_tanh, xs, g1, c1, h1, tc1, d1,
                        g2, c2, h2, tc2)
        err = pred - y[r]
        losses[it] = err * err
        if not math.isfinite(losses[it]):
            return it
        _backward(theta, n1, n2, mask, out_tanh, pred, 2.0 * err, xs, g1, c1, h1, tc1, d1,
                  g2, c2, h2, tc2, grad, dh2, dd1, dh1, dx)
        for q in range(theta.shape[0]):
            theta[q] -= lr * grad[q]
    return -1


@njit(cache=True)
def _predict_batch(theta, n1, n2, X, out_tanh):
    N, T = X.shape
    mask = np.ones((T, n1))
    xs = np.empty((T, 1))
    g1 = np.empty((T, 4 * n1))
    c1 = np.empty((T + 1, n1))
    h1 = np.empty((T + 1, n1))
    tc1 = np.empty((T, n1))
    d1 = np.empty((T, n1))
    g2 = np.empty((T, 4 * n2))
    c2 = np.empty((T + 1, n2))
    h2 = np.empty((T + 1, n2))
    tc2 = np.empty((T, n2))
    out = np.empty(N)
    for r in range(N):
        out[r] = _forward(theta, n1, n2, X[r], mask, out_tanh, xs, g1, c1, h1, tc1, d1,
                          g2, c2, h2, tc2)
    return out


# --- python surface ----------------------------------------------------------

@dataclass
class ForwardCache:
    window: np.ndarray
    mask: np.ndarray
    prediction: float
    xs: np.ndarray
    layer1: tuple  # gates, c, h, tanh(c)
    dropped: np.ndarray
    layer2: tuple


def dropout_mask(rng, lag, n1, rate):
    if rate == 0.0:
        return np.ones((lag, n1))
    keep = rng.random((lag, n1)) >= rate
    return keep / (1.0 - rate)


def _check_window(params, window):
    window = np.ascontiguousarray(window, dtype=np.float64)
    if window.ndim != 1 or window.shape[0] != params.lag:
        raise ShapeMismatch(f"window must be a vector of length {params.lag}, got shape {window.shape}")
    return window


def forward(params, window, mode="eval", rng=None, mask=None):
    """Prediction and activation cache for one window.

    In ``train`` mode a dropout mask is drawn from ``rng`` unless ``mask`` is
    given; in ``eval`` mode dropout is off.
    """
    window = _check_window(params, window)
    n1, n2 = params.hidden
    T = window.shape[0]
    if mode == "eval":
        mask = np.ones((T, n1))
    elif mode == "train":
        if mask is None:
            if rng is None:
                raise ValueError("train mode needs an rng or an explicit mask")
            mask = dropout_mask(rng, T, n1, params.dropout)
        mask = np.ascontiguousarray(mask, dtype=np.float64)
        if mask.shape != (T, n1):
            raise ShapeMismatch(f"dropout mask must have shape {(T, n1)}")
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    xs = np.empty((T, 1))
    l1 = (np.empty((T, 4 * n1)), np.empty((T + 1, n1)), np.empty((T + 1, n1)), np.empty((T, n1)))
    d1 = np.empty((T, n1))
    l2 = (np.empty((T, 4 * n2)), np.empty((T + 1, n2)), np.empty((T + 1, n2)), np.empty((T, n2)))
    pred = _forward(params.theta, n1, n2, window, mask, params.output_activation == "tanh",
                    xs, *l1, d1, *l2)
    return pred, ForwardCache(window, mask, pred, xs, l1, d1, l2)


def backward(cache, target, params, loss_scale=1.0):
    """Gradient of ``loss_scale * (prediction - target)**2`` as an ``LstmParams``."""
    n1, n2 = params.hidden
    T = cache.window.shape[0]
    grad = np.empty_like(params.theta)
    dpred = loss_scale * 2.0 * (cache.prediction - target)
    _backward(params.theta, n1, n2, cache.mask, params.output_activation == "tanh",
              cache.prediction, dpred, cache.xs, *cache.layer1, cache.dropped, *cache.layer2,
              grad, np.empty((T, n2)), np.empty((T, n1)), np.empty((T, n1)), np.empty((T, 1)))
    return params.like(grad)


def predict(params, window):
    """Eval-mode prediction for one window."""
    return forward(params, window)[0]


def predict_batch(params, windows):
    windows = np.ascontiguousarray(windows, dtype=np.float64)
    if windows.ndim != 2 or windows.shape[1] != params.lag:
        raise ShapeMismatch(f"windows must have shape (n, {params.lag})")
    n1, n2 = params.hidden
    return _predict_batch(params.theta, n1, n2, windows, params.output_activation == "tanh")


def sgd_segment(params, inputs, targets, rows, masks, lr):
    """Run SGD in place over the given row sequence; returns (losses, failed_at)."""
    n1, n2 = params.hidden
    losses = np.empty(len(rows))
    failed = _train_segment(params.theta, n1, n2, np.ascontiguousarray(inputs, dtype=np.float64),
                            np.ascontiguousarray(targets, dtype=np.float64),
                            np.ascontiguousarray(rows, dtype=np.int64),
                            np.ascontiguousarray(masks, dtype=np.float64), float(lr),
                            params.output_activation == "tanh", losses)
    return losses, int(failed)
