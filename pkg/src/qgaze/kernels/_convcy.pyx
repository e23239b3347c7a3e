# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled float32 conv kernels.

Two levels:
  * per-layer conv2d_forward / conv2d_backward (batch-major, mirrors the
    NumPy fallback exactly);
  * fused conv_stack_forward / conv_stack_backward used by the Q-network's
    hot path. The stack keeps activations channel-major ([C, B, H, W]) so
    each layer is a single large sgemm over all batch positions, with
    bias + ReLU fused into the output pass.
"""

import numpy as np
cimport numpy as cnp
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport sgemm

cnp.import_array()


cdef inline int out_size(int n, int k, int stride) nogil:
    return (n - k) / stride + 1


cdef void _sgemm_rowmajor(bint ta, bint tb, float[:, ::1] amat, float[:, ::1] bmat,
                          float[:, ::1] cmat, float alpha, float beta) nogil:
    # Row-major C = alpha * op(A) @ op(B) + beta * C via column-major BLAS:
    # compute C^T = op(B)^T @ op(A)^T.
    cdef int m = cmat.shape[1]
    cdef int n = cmat.shape[0]
    cdef int kk = amat.shape[0] if ta else amat.shape[1]
    cdef int lda = amat.shape[1], ldb = bmat.shape[1], ldc = cmat.shape[1]
    cdef char tra = b'T' if tb else b'N'
    cdef char trb = b'T' if ta else b'N'
    sgemm(&tra, &trb, &m, &n, &kk, &alpha,
          &bmat[0, 0], &ldb, &amat[0, 0], &lda, &beta, &cmat[0, 0], &ldc)


# ---------------------------------------------------------------------------
# per-layer kernels (batch-major, [B, C, H, W])
# ---------------------------------------------------------------------------

cdef void _im2col(const float[:, :, :, ::1] x, float[:, :, ::1] cols,
                  int k, int stride) nogil:
    cdef int b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef int hp = out_size(h, k, stride), wp = out_size(w, k, stride)
    cdef int bi, ci, ky, kx, oy, ox, row
    for bi in range(b):
        for ci in range(c):
            for ky in range(k):
                for kx in range(k):
                    row = (ci * k + ky) * k + kx
                    for oy in range(hp):
                        for ox in range(wp):
                            cols[bi, row, oy * wp + ox] = x[bi, ci, oy * stride + ky, ox * stride + kx]


cdef void _col2im(const float[:, :, ::1] dcols, float[:, :, :, ::1] dx,
                  int k, int stride) nogil:
    cdef int b = dx.shape[0], c = dx.shape[1], h = dx.shape[2], w = dx.shape[3]
    cdef int hp = out_size(h, k, stride), wp = out_size(w, k, stride)
    cdef int bi, ci, ky, kx, oy, ox, row
    for bi in range(b):
        for ci in range(c):
            for ky in range(k):
                for kx in range(k):
                    row = (ci * k + ky) * k + kx
                    for oy in range(hp):
                        for ox in range(wp):
                            dx[bi, ci, oy * stride + ky, ox * stride + kx] += dcols[bi, row, oy * wp + ox]


def conv2d_forward(x, filters, bias, int stride):
    x = np.ascontiguousarray(x, dtype=np.float32)
    filters = np.ascontiguousarray(filters, dtype=np.float32)
    cdef int b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef int co = filters.shape[0], k = filters.shape[2]
    cdef int hp = out_size(h, k, stride), wp = out_size(w, k, stride)
    cdef int ckk = c * k * k, l = hp * wp
    cols_arr = np.empty((b, ckk, l), dtype=np.float32)
    out_arr = np.empty((b, co, l), dtype=np.float32)
    w_arr = filters.reshape(co, ckk)
    cdef float[:, :, :, ::1] xv = x
    cdef float[:, :, ::1] colsv = cols_arr
    cdef float[:, :, ::1] outv = out_arr
    cdef float[:, ::1] wv = w_arr
    cdef float[::1] bv = np.ascontiguousarray(bias, dtype=np.float32)
    cdef int bi, oi, li
    with nogil:
        _im2col(xv, colsv, k, stride)
        for bi in range(b):
            _sgemm_rowmajor(False, False, wv, colsv[bi], outv[bi], 1.0, 0.0)
        for bi in range(b):
            for oi in range(co):
                for li in range(l):
                    outv[bi, oi, li] += bv[oi]
    return out_arr.reshape(b, co, hp, wp), cols_arr


def conv2d_backward(dout, cols, tuple x_shape, filters, int stride, bint need_input_grad=True):
    cdef int b = x_shape[0], c = x_shape[1], h = x_shape[2], w = x_shape[3]
    filters = np.ascontiguousarray(filters, dtype=np.float32)
    cdef int co = filters.shape[0], k = filters.shape[2]
    cdef int hp = out_size(h, k, stride), wp = out_size(w, k, stride)
    cdef int ckk = c * k * k, l = hp * wp
    dout = np.ascontiguousarray(dout, dtype=np.float32).reshape(b, co, l)
    cols = np.ascontiguousarray(cols, dtype=np.float32)
    w_arr = filters.reshape(co, ckk)
    dw_arr = np.zeros((co, ckk), dtype=np.float32)
    db_arr = np.zeros(co, dtype=np.float32)
    cdef float[:, :, ::1] doutv = dout
    cdef float[:, :, ::1] colsv = cols
    cdef float[:, ::1] dwv = dw_arr
    cdef float[:, ::1] wv = w_arr
    cdef float[::1] dbv = db_arr
    cdef int bi, oi, li
    cdef float[:, :, ::1] dcolsv
    cdef float[:, :, :, ::1] dxv
    with nogil:
        for bi in range(b):
            _sgemm_rowmajor(False, True, doutv[bi], colsv[bi], dwv, 1.0, 1.0)
        for bi in range(b):
            for oi in range(co):
                for li in range(l):
                    dbv[oi] += doutv[bi, oi, li]
    if not need_input_grad:
        return None, dw_arr.reshape(co, c, k, k), db_arr
    dcols_arr = np.empty((b, ckk, l), dtype=np.float32)
    dx_arr = np.zeros(x_shape, dtype=np.float32)
    dcolsv = dcols_arr
    dxv = dx_arr
    with nogil:
        for bi in range(b):
            _sgemm_rowmajor(True, False, wv, doutv[bi], dcolsv[bi], 1.0, 0.0)
        _col2im(dcolsv, dxv, k, stride)
    return dx_arr, dw_arr.reshape(co, c, k, k), db_arr


# ---------------------------------------------------------------------------
# fused stack kernels (channel-major, [C, B, H, W])
# ---------------------------------------------------------------------------

cdef void _im2col_cm(const float[:, :, :, ::1] x, float[:, ::1] cols,
                     int k, int stride) nogil:
    # x: [C, B, H, W]; cols: [C*k*k, B*H'*W']. Inner loop copies one output
    # row at a time: memcpy for stride 1, a vectorizable gather otherwise.
    cdef int c = x.shape[0], b = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef int hp = out_size(h, k, stride), wp = out_size(w, k, stride)
    cdef int ci, ky, kx, bi, oy, ox, row
    cdef const float* src
    cdef float* dst
    for ci in range(c):
        for ky in range(k):
            for kx in range(k):
                row = (ci * k + ky) * k + kx
                for bi in range(b):
                    for oy in range(hp):
                        src = &x[ci, bi, oy * stride + ky, kx]
                        dst = &cols[row, (<long> bi * hp + oy) * wp]
                        if stride == 1:
                            memcpy(dst, src, wp * sizeof(float))
                        else:
                            for ox in range(wp):
                                dst[ox] = src[ox * stride]


cdef void _col2im_cm(const float[:, ::1] dcols, float[:, :, :, ::1] dx,
                     int k, int stride) nogil:
    cdef int c = dx.shape[0], b = dx.shape[1], h = dx.shape[2], w = dx.shape[3]
    cdef int hp = out_size(h, k, stride), wp = out_size(w, k, stride)
    cdef int ci, ky, kx, bi, oy, ox, row
    cdef const float* src
    cdef float* dst
    for ci in range(c):
        for ky in range(k):
            for kx in range(k):
                row = (ci * k + ky) * k + kx
                for bi in range(b):
                    for oy in range(hp):
                        src = &dcols[row, (<long> bi * hp + oy) * wp]
                        dst = &dx[ci, bi, oy * stride + ky, kx]
                        for ox in range(wp):
                            dst[ox * stride] += src[ox]


def conv_stack_forward(frames, list filters, list biases, list strides, bint want_cache=True):
    """frames: [B, C0, H, W] float32. Applies conv+bias+ReLU per layer.

    Returns (slices [B, L_last, C_last], cache) where cache holds the
    channel-major activations and patch matrices needed for backward
    (None when want_cache is false).
    """
    frames = np.ascontiguousarray(frames, dtype=np.float32)
    cdef int b = frames.shape[0], c0 = frames.shape[1]
    cdef int h = frames.shape[2], w = frames.shape[3]
    # [B, C0, H, W] -> [C0, B, H, W]
    x_cm = np.ascontiguousarray(np.transpose(frames, (1, 0, 2, 3)))
    acts = []
    cols_list = []
    cdef int li_layer, c, k, s, hp, wp, co, ckk, l
    cdef float[:, ::1] colsv, outv, wv
    cdef float[:, :, :, ::1] xv
    cdef float[::1] bv
    cdef int oi
    cdef long pos, total
    for li_layer in range(len(filters)):
        filt = np.ascontiguousarray(filters[li_layer], dtype=np.float32)
        bias = np.ascontiguousarray(biases[li_layer], dtype=np.float32)
        s = strides[li_layer]
        c = x_cm.shape[0]
        h = x_cm.shape[2]
        w = x_cm.shape[3]
        co = filt.shape[0]
        k = filt.shape[2]
        hp = out_size(h, k, s)
        wp = out_size(w, k, s)
        ckk = c * k * k
        l = hp * wp
        cols_arr = np.empty((ckk, b * l), dtype=np.float32)
        out_arr = np.empty((co, b * l), dtype=np.float32)
        w2 = filt.reshape(co, ckk)
        xv = x_cm
        colsv = cols_arr
        outv = out_arr
        wv = w2
        bv = bias
        with nogil:
            _im2col_cm(xv, colsv, k, s)
            _sgemm_rowmajor(False, False, wv, colsv, outv, 1.0, 0.0)
            # fused bias + ReLU
            total = <long> b * l
            for oi in range(co):
                for pos in range(total):
                    outv[oi, pos] += bv[oi]
                    if outv[oi, pos] < 0:
                        outv[oi, pos] = 0
        x_cm = out_arr.reshape(co, b, hp, wp)
        if want_cache:
            acts.append(x_cm)
            cols_list.append(cols_arr)
    # slices: [B, L, D] from x_cm [D, B, L]
    d_last = x_cm.shape[0]
    slices = np.ascontiguousarray(
        np.transpose(x_cm.reshape(d_last, b, hp * wp), (1, 2, 0)))
    cache = None
    if want_cache:
        cache = {"backend": "compiled", "acts": acts, "cols": cols_list,
                 "frames_cm_shape": (c0, b, frames.shape[2], frames.shape[3]),
                 "grid": (hp, wp)}
    return slices, cache


def conv_stack_backward(dslices, dict cache, list filters, list strides,
                        bint need_input_grad=False):
    """Backward through the fused stack. dslices: [B, L, D] gradient on the
    final ReLU output. Returns (per-layer [(dfilters, dbias), ...], dframes
    or None)."""
    cdef int b = dslices.shape[0]
    acts = cache["acts"]
    cols_list = cache["cols"]
    hp0, wp0 = cache["grid"]
    d_last = dslices.shape[2]
    # [B, L, D] -> [D, B*L]
    dx = np.ascontiguousarray(np.transpose(
        np.ascontiguousarray(dslices, dtype=np.float32), (2, 0, 1))).reshape(d_last, -1)
    grads = [None] * len(filters)
    cdef int li_layer, co, ckk, k, s, c_in, h_in, w_in, l
    cdef float[:, ::1] dxv, actv, colsv, dwv, wv, dcolsv
    cdef float[::1] dbv
    cdef float[:, :, :, ::1] dinv
    cdef int oi
    cdef long pos, total
    for li_layer in range(len(filters) - 1, -1, -1):
        filt = np.ascontiguousarray(filters[li_layer], dtype=np.float32)
        s = strides[li_layer]
        co = filt.shape[0]
        k = filt.shape[2]
        act = acts[li_layer]              # [Co, B, Hp, Wp], post-ReLU
        cols_arr = cols_list[li_layer]    # [CKK, B*L]
        ckk = cols_arr.shape[0]
        l = act.shape[2] * act.shape[3]
        act2 = act.reshape(co, b * l)
        # ReLU mask: output > 0
        dxv = dx
        actv = act2
        total = <long> b * l
        with nogil:
            for oi in range(co):
                for pos in range(total):
                    if actv[oi, pos] <= 0:
                        dxv[oi, pos] = 0
        dw_arr = np.empty((co, ckk), dtype=np.float32)
        db_arr = np.zeros(co, dtype=np.float32)
        w2 = filt.reshape(co, ckk)
        colsv = cols_arr
        dwv = dw_arr
        dbv = db_arr
        wv = w2
        with nogil:
            _sgemm_rowmajor(False, True, dxv, colsv, dwv, 1.0, 0.0)
            for oi in range(co):
                for pos in range(total):
                    dbv[oi] += dxv[oi, pos]
        grads[li_layer] = (dw_arr.reshape(filt.shape), db_arr)
        if li_layer == 0 and not need_input_grad:
            dx = None
            break
        # input shape for this layer
        if li_layer == 0:
            in_shape = cache["frames_cm_shape"]
        else:
            prev = acts[li_layer - 1]
            in_shape = (prev.shape[0], prev.shape[1], prev.shape[2], prev.shape[3])
        dcols_arr = np.empty((ckk, b * l), dtype=np.float32)
        din_arr = np.zeros(in_shape, dtype=np.float32)
        dcolsv = dcols_arr
        dinv = din_arr
        with nogil:
            _sgemm_rowmajor(True, False, wv, dxv, dcolsv, 1.0, 0.0)
            _col2im_cm(dcolsv, dinv, k, s)
        dx = din_arr.reshape(in_shape[0], -1)
    dframes = None
    if need_input_grad and dx is not None:
        c0, bb, hh, ww = cache["frames_cm_shape"]
        dframes = np.ascontiguousarray(
            np.transpose(dx.reshape(c0, bb, hh, ww), (1, 0, 2, 3)))
    return grads, dframes
