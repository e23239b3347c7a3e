"""Layers with explicit forward/backward passes.

Every forward returns ``(output, cache)``; the matching backward consumes
the cache and returns gradients in the same order as the forward inputs.
Backward passes are exact (checked against central finite differences in
the test suite, which runs them in float64).
"""

import numpy as np

from .. import kernels
from ..errors import MissingCacheError, NonFiniteError, ShapeError
from .tensor import Tensor


def _uniform_fanin(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0)


def relu_backward(dout, x):
    return dout * (x > 0)


def tanh_op(x):
    return np.tanh(x)


def tanh_backward(dout, y):
    """Backward through tanh given the forward *output* y."""
    return dout * (1.0 - y * y)


def sigmoid(x):
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits, axis=-1):
    """Max-subtracted softmax; output sums to 1 along ``axis``."""
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(dout, y, axis=-1):
    """Backward through softmax given the forward output y."""
    dot = np.sum(dout * y, axis=axis, keepdims=True)
    return y * (dout - dot)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

class ConvLayer:
    """2-D valid cross-correlation with square filters and a fixed stride."""

    def __init__(self, in_ch, out_ch, ksize, stride, rng=None, dtype=np.float32):
        if ksize < 1 or stride < 1:
            raise ShapeError("kernel size and stride must be >= 1")
        self.stride = stride
        fan_in = in_ch * ksize * ksize
        rng = rng if rng is not None else np.random.default_rng(0)
        self.filters = Tensor(_uniform_fanin(rng, (out_ch, in_ch, ksize, ksize), fan_in, dtype),
                              requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)

    @property
    def ksize(self):
        return self.filters.shape[2]

    def out_hw(self, h, w):
        k, s = self.ksize, self.stride
        if h < k or w < k:
            raise ShapeError(f"input {h}x{w} smaller than kernel {k}")
        return kernels.conv_out_size(h, k, s), kernels.conv_out_size(w, k, s)

    def parameters(self):
        return {"filters": self.filters, "bias": self.bias}


def conv2d_forward(x, layer):
    """x: [B, C_in, H, W] -> [B, C_out, H', W']. Bias per output channel, no activation."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeError(f"conv input must be [B, C, H, W], got {x.shape}")
    if x.shape[1] != layer.filters.shape[1]:
        raise ShapeError(
            f"input has {x.shape[1]} channels but filters expect {layer.filters.shape[1]}")
    layer.out_hw(x.shape[2], x.shape[3])
    out, cols = kernels.conv2d_forward(x, layer.filters.data, layer.bias.data, layer.stride)
    cache = (cols, x.shape)
    return out, cache


def conv2d_backward(dout, cache, layer, need_input_grad=True):
    """Returns (dx or None, dfilters, dbias)."""
    if cache is None:
        raise MissingCacheError("conv2d_backward requires the forward cache")
    cols, x_shape = cache
    b, co = x_shape[0], layer.filters.shape[0]
    hp, wp = layer.out_hw(x_shape[2], x_shape[3])
    if dout.shape != (b, co, hp, wp):
        raise ShapeError(f"upstream grad shape {dout.shape} != forward output {(b, co, hp, wp)}")
    return kernels.conv2d_backward(dout, cols, x_shape, layer.filters.data,
                                   layer.stride, need_input_grad)


# ---------------------------------------------------------------------------
# linear
# ---------------------------------------------------------------------------

class LinearLayer:
    def __init__(self, in_dim, out_dim, rng=None, dtype=np.float32):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = Tensor(_uniform_fanin(rng, (out_dim, in_dim), in_dim, dtype),
                              requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def parameters(self):
        return {"weights": self.weights, "bias": self.bias}


def linear_forward(x, layer):
    """x: [B, n] or [n] -> same leading shape with n replaced by m."""
    x = np.asarray(x)
    if x.shape[-1] != layer.weights.shape[1]:
        raise ShapeError(f"input dim {x.shape[-1]} != weight in-dim {layer.weights.shape[1]}")
    out = x @ layer.weights.data.T + layer.bias.data
    return out, x


def linear_backward(dout, cache, layer):
    """Returns (dx, dweights, dbias)."""
    if cache is None:
        raise MissingCacheError("linear_backward requires the forward cache")
    x = cache
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    dw = d2.T @ x2
    db = d2.sum(axis=0)
    dx = (d2 @ layer.weights.data).reshape(x.shape)
    return dx, dw, db


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

class LstmCell:
    """Single LSTM cell; gate order in the stacked weight rows is (i, f, g, o).

    i: input gate, f: forget gate, g: candidate (tanh), o: output gate.
    The forget-gate bias initializes to 1 so early training keeps state.
    """

    def __init__(self, in_dim, hidden, rng=None, dtype=np.float32, forget_bias=1.0):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden = hidden
        self.w_x = Tensor(_uniform_fanin(rng, (4 * hidden, in_dim), in_dim, dtype),
                          requires_grad=True)
        self.w_h = Tensor(_uniform_fanin(rng, (4 * hidden, hidden), hidden, dtype),
                          requires_grad=True)
        b = np.zeros(4 * hidden, dtype=dtype)
        b[hidden : 2 * hidden] = forget_bias
        self.bias = Tensor(b, requires_grad=True)

    def parameters(self):
        return {"w_x": self.w_x, "w_h": self.w_h, "bias": self.bias}


def lstm_step(cell, x, h_prev, c_prev):
    """One step. x: [B, in] or [in], h_prev/c_prev likewise -> (h, c, cache).

    1-d inputs produce 1-d outputs; the cache is always batched.
    """
    squeeze = np.asarray(x).ndim == 1
    x, h_prev, c_prev = (np.atleast_2d(np.asarray(a)) for a in (x, h_prev, c_prev))
    hsz = cell.hidden
    if h_prev.shape[-1] != hsz or c_prev.shape[-1] != hsz:
        raise ShapeError("state width does not match cell hidden size")
    for name, a in (("x", x), ("h_prev", h_prev), ("c_prev", c_prev)):
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"lstm_step input {name} is non-finite")
    pre = x @ cell.w_x.data.T + h_prev @ cell.w_h.data.T + cell.bias.data
    i = sigmoid(pre[:, :hsz])
    f = sigmoid(pre[:, hsz : 2 * hsz])
    g = np.tanh(pre[:, 2 * hsz : 3 * hsz])
    o = sigmoid(pre[:, 3 * hsz :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = (x, h_prev, c_prev, i, f, g, o, tc)
    if squeeze:
        return h[0], c[0], cache
    return h, c, cache


def lstm_backward(cell, dh, dc, cache):
    """Backward through one step. Returns (dx, dh_prev, dc_prev, dw_x, dw_h, dbias)."""
    if cache is None:
        raise MissingCacheError("lstm_backward requires the forward cache")
    x, h_prev, c_prev, i, f, g, o, tc = cache
    dh = np.atleast_2d(dh)
    dc = np.zeros_like(tc) if dc is None else np.atleast_2d(dc).copy()
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    di = dc * g
    dg = dc * i
    df = dc * c_prev
    dc_prev = dc * f
    dpre = np.concatenate(
        [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)], axis=1)
    dw_x = dpre.T @ x
    dw_h = dpre.T @ h_prev
    dbias = dpre.sum(axis=0)
    dx = dpre @ cell.w_x.data
    dh_prev = dpre @ cell.w_h.data
    return dx, dh_prev, dc_prev, dw_x, dw_h, dbias
