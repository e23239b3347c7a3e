"""Hot numeric kernels with backend selection at import time.

The compiled Cython extension is preferred when it imports cleanly; the
NumPy implementation is the fallback. ``QGAZE_KERNELS=numpy`` (or
``=compiled``) overrides the automatic choice. Float64 inputs always take
the NumPy path: the compiled kernels are float32-only and float64 exists
for the finite-difference oracles in the test suite.
"""

import os

import numpy as np

from . import _convnp

_compiled = None
_requested = os.environ.get("QGAZE_KERNELS", "auto")
if _requested not in ("numpy",):
    try:
        from . import _convcy as _compiled
    except ImportError:
        _compiled = None
        if _requested == "compiled":
            raise

BACKEND = "compiled" if _compiled is not None else "numpy"


def conv2d_forward(x, filters, bias, stride):
    """Valid cross-correlation [B,C,H,W] -> [B,Co,H',W'] plus a cache."""
    if _compiled is not None and x.dtype == np.float32:
        return _compiled.conv2d_forward(x, filters, bias, stride)
    return _convnp.conv2d_forward(x, filters, bias, stride)


def conv2d_backward(dout, cols, x_shape, filters, stride, need_input_grad=True):
    """Gradients of conv2d_forward. Returns (dx_or_None, dfilters, dbias)."""
    if _compiled is not None and dout.dtype == np.float32:
        return _compiled.conv2d_backward(dout, cols, tuple(x_shape), filters, stride, need_input_grad)
    return _convnp.conv2d_backward(dout, cols, x_shape, filters, stride, need_input_grad)


def conv_stack_forward(frames, filters, biases, strides, want_cache=True):
    """Fused conv+bias+ReLU stack over [B, C, H, W] frames -> feature slices
    [B, L, D] (L spatial positions of the last layer, D its channels)."""
    if _compiled is not None and frames.dtype == np.float32:
        return _compiled.conv_stack_forward(frames, list(filters), list(biases),
                                            list(strides), want_cache)
    return _convnp.conv_stack_forward(frames, filters, biases, strides, want_cache)


def conv_stack_backward(dslices, cache, filters, strides, need_input_grad=False):
    """Backward through conv_stack_forward; dispatches on the cache's origin."""
    if cache.get("backend") == "compiled":
        return _compiled.conv_stack_backward(
            np.ascontiguousarray(dslices, dtype=np.float32), cache,
            list(filters), list(strides), need_input_grad)
    return _convnp.conv_stack_backward(dslices, cache, filters, strides, need_input_grad)


def conv_out_size(n, k, stride):
    return _convnp.out_size(n, k, stride)
