"""NumPy conv2d kernels (im2col + BLAS matmul).

This is the portable fallback for the compiled extension and the only path
used for float64 inputs (the compiled kernels are float32-only, float64 is
reserved for finite-difference test oracles).

The fused stack kernels keep activations channel-major ([C, B, H, W]) so
each layer reduces to one large matmul over every batch position.
"""

import numpy as np


def out_size(n: int, k: int, stride: int) -> int:
    return (n - k) // stride + 1


def im2col(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Unfold [B, C, H, W] into patch columns [B, C*k*k, H'*W']."""
    b, c, h, w = x.shape
    hp, wp = out_size(h, k, stride), out_size(w, k, stride)
    cols = np.empty((b, c, k, k, hp, wp), dtype=x.dtype)
    for ky in range(k):
        for kx in range(k):
            cols[:, :, ky, kx] = x[:, :, ky : ky + stride * hp : stride, kx : kx + stride * wp : stride]
    return cols.reshape(b, c * k * k, hp * wp)


def conv2d_forward(x: np.ndarray, filters: np.ndarray, bias: np.ndarray, stride: int):
    """Valid cross-correlation. Returns (out [B,Co,H',W'], cols cache)."""
    b = x.shape[0]
    co, ci, k, _ = filters.shape
    hp, wp = out_size(x.shape[2], k, stride), out_size(x.shape[3], k, stride)
    cols = im2col(x, k, stride)
    w_mat = filters.reshape(co, ci * k * k)
    out = np.matmul(w_mat, cols)  # [B, Co, L]
    out += bias[:, None]
    return out.reshape(b, co, hp, wp), cols


def conv2d_backward(dout: np.ndarray, cols: np.ndarray, x_shape, filters: np.ndarray,
                    stride: int, need_input_grad: bool = True):
    """Gradients of conv2d_forward. Returns (dx or None, dfilters, dbias)."""
    b, c, h, w = x_shape
    co, ci, k, _ = filters.shape
    hp, wp = out_size(h, k, stride), out_size(w, k, stride)
    dout_mat = dout.reshape(b, co, hp * wp)
    dbias = dout_mat.sum(axis=(0, 2))
    dw = np.einsum("bol,bcl->oc", dout_mat, cols, optimize=True)
    dfilters = dw.reshape(co, ci, k, k)
    dx = None
    if need_input_grad:
        w_mat = filters.reshape(co, ci * k * k)
        dcols = np.matmul(w_mat.T, dout_mat)  # [B, C*k*k, L]
        dcols = dcols.reshape(b, c, k, k, hp, wp)
        dx = np.zeros(x_shape, dtype=dout.dtype)
        for ky in range(k):
            for kx in range(k):
                dx[:, :, ky : ky + stride * hp : stride, kx : kx + stride * wp : stride] += dcols[:, :, ky, kx]
    return dx, dfilters, dbias


# ---------------------------------------------------------------------------
# fused stack (channel-major)
# ---------------------------------------------------------------------------

def _im2col_cm(x_cm, k, stride):
    """[C, B, H, W] -> [C*k*k, B*H'*W'] patch matrix."""
    c, b, h, w = x_cm.shape
    hp, wp = out_size(h, k, stride), out_size(w, k, stride)
    cols = np.empty((c, k, k, b, hp, wp), dtype=x_cm.dtype)
    for ky in range(k):
        for kx in range(k):
            cols[:, ky, kx] = x_cm[:, :, ky : ky + stride * hp : stride, kx : kx + stride * wp : stride]
    return cols.reshape(c * k * k, b * hp * wp)


def conv_stack_forward(frames, filters, biases, strides, want_cache=True):
    """Conv + bias + ReLU per layer over [B, C, H, W] frames.

    Returns (slices [B, L, D], cache or None); L is the spatial position
    count of the last layer and D its channel count.
    """
    b = frames.shape[0]
    x_cm = np.ascontiguousarray(np.transpose(frames, (1, 0, 2, 3)))
    in_shape = x_cm.shape
    acts, cols_list = [], []
    for filt, bias, stride in zip(filters, biases, strides):
        co, ci, k, _ = filt.shape
        h, w = x_cm.shape[2], x_cm.shape[3]
        hp, wp = out_size(h, k, stride), out_size(w, k, stride)
        cols2 = _im2col_cm(x_cm, k, stride)
        out2 = filt.reshape(co, -1) @ cols2
        out2 += bias[:, None]
        np.maximum(out2, 0, out=out2)
        x_cm = out2.reshape(co, b, hp, wp)
        if want_cache:
            acts.append(x_cm)
            cols_list.append(cols2)
    d = x_cm.shape[0]
    slices = np.ascontiguousarray(
        np.transpose(x_cm.reshape(d, b, -1), (1, 2, 0)))
    cache = None
    if want_cache:
        cache = {"backend": "numpy", "acts": acts, "cols": cols_list,
                 "frames_cm_shape": in_shape}
    return slices, cache


def conv_stack_backward(dslices, cache, filters, strides, need_input_grad=False):
    """Backward through the fused stack. dslices: [B, L, D] gradient on the
    final ReLU output. Returns ([(dfilters, dbias), ...], dframes or None)."""
    acts = cache["acts"]
    cols_list = cache["cols"]
    d = dslices.shape[2]
    dx2 = np.ascontiguousarray(np.transpose(dslices, (2, 0, 1))).reshape(d, -1)
    grads = [None] * len(filters)
    for i in range(len(filters) - 1, -1, -1):
        act = acts[i]
        co, ci, k, _ = filters[i].shape
        stride = strides[i]
        dpre = dx2 * (act.reshape(dx2.shape) > 0)
        dw = dpre @ cols_list[i].T
        db = dpre.sum(axis=1)
        grads[i] = (dw.reshape(filters[i].shape), db)
        if i == 0 and not need_input_grad:
            dx2 = None
            break
        in_shape = acts[i - 1].shape if i > 0 else cache["frames_cm_shape"]
        cin, b, h, w = in_shape
        hp, wp = act.shape[2], act.shape[3]
        dcols6 = (filters[i].reshape(co, -1).T @ dpre).reshape(cin, k, k, b, hp, wp)
        dxin = np.zeros(in_shape, dtype=dpre.dtype)
        for ky in range(k):
            for kx in range(k):
                dxin[:, :, ky : ky + stride * hp : stride, kx : kx + stride * wp : stride] += dcols6[:, ky, kx]
        dx2 = dxin.reshape(cin, -1)
    dframes = None
    if need_input_grad and dx2 is not None:
        cin, b, h, w = cache["frames_cm_shape"]
        dframes = np.ascontiguousarray(
            np.transpose(dx2.reshape(cin, b, h, w), (1, 0, 2, 3)))
    return grads, dframes
