"""Soft spatial attention over convolutional feature slices.

Given the K*K feature grid of the last conv layer, flattened into K^2
slices of dimension D, each slice is scored against the previous recurrent
hidden state:

    score_i = tanh(hidden_w . h_prev + slice_w . C_i)
    alpha   = softmax(score)           (over the K^2 regions)
    context = sum_i alpha_i * C_i

The scores are scalars (one per region) so the softmax over regions is
well-defined; neither projection carries a bias term. Everything is
differentiable, so the module trains end to end from the Q-loss.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MissingCacheError, NonFiniteError, ShapeError
from .imageops import bilinear_resize
from .nn.layers import softmax, softmax_backward
from .nn.tensor import Tensor


class AttentionParams:
    """Two score projections: hidden state -> scalar and feature slice -> scalar."""

    def __init__(self, hidden_size, feature_dim, rng=None, dtype=np.float32):
        rng = rng if rng is not None else np.random.default_rng(0)
        bh = 1.0 / np.sqrt(hidden_size)
        bf = 1.0 / np.sqrt(feature_dim)
        self.hidden_w = Tensor(rng.uniform(-bh, bh, hidden_size).astype(dtype), requires_grad=True)
        self.slice_w = Tensor(rng.uniform(-bf, bf, feature_dim).astype(dtype), requires_grad=True)

    def parameters(self):
        return {"hidden_w": self.hidden_w, "slice_w": self.slice_w}


@dataclass
class AttentionOutput:
    alpha: np.ndarray    # [.., K^2] region weights, nonnegative, sums to 1
    context: np.ndarray  # [.., D] expected feature slice


def attend(slices, h_prev, params):
    """Score, normalize, and combine the feature slices.

    slices: [K^2, D] or [B, K^2, D]; h_prev: [H] or [B, H].
    Returns (AttentionOutput, cache).
    """
    slices = np.asarray(slices)
    h_prev = np.asarray(h_prev)
    squeeze = slices.ndim == 2
    if squeeze:
        slices = slices[None]
        h_prev = np.atleast_2d(h_prev)
    if slices.ndim != 3:
        raise ShapeError(f"slices must be [K^2, D] or [B, K^2, D], got {slices.shape}")
    if slices.shape[-1] != params.slice_w.shape[0]:
        raise ShapeError(
            f"slice dim {slices.shape[-1]} != slice_w dim {params.slice_w.shape[0]}")
    if h_prev.shape[-1] != params.hidden_w.shape[0]:
        raise ShapeError(
            f"hidden dim {h_prev.shape[-1]} != hidden_w dim {params.hidden_w.shape[0]}")
    if not (np.all(np.isfinite(slices)) and np.all(np.isfinite(h_prev))):
        raise NonFiniteError("attend received non-finite inputs")

    h_score = h_prev @ params.hidden_w.data          # [B]
    s_score = slices @ params.slice_w.data            # [B, K^2]
    scores = np.tanh(h_score[:, None] + s_score)      # [B, K^2]
    alpha = softmax(scores, axis=-1)
    context = np.einsum("bk,bkd->bd", alpha, slices)
    cache = (slices, h_prev, scores, alpha, squeeze)
    if squeeze:
        return AttentionOutput(alpha[0], context[0]), cache
    return AttentionOutput(alpha, context), cache


def attend_backward(dalpha, dcontext, cache, params):
    """Backward through attend.

    dalpha: grad on the region weights (may be None), dcontext: grad on the
    context vector (may be None). Returns (dslices, dh_prev, dhidden_w,
    dslice_w) with the same batching as the forward inputs.
    """
    if cache is None:
        raise MissingCacheError("attend_backward requires the forward cache")
    slices, h_prev, scores, alpha, squeeze = cache
    b, k2, _ = slices.shape
    if dalpha is None:
        dalpha = np.zeros_like(alpha)
    else:
        dalpha = np.asarray(dalpha).reshape(b, k2).astype(alpha.dtype, copy=False)
    if dcontext is None:
        dcontext = np.zeros((b, slices.shape[2]), dtype=slices.dtype)
    else:
        dcontext = np.asarray(dcontext).reshape(b, slices.shape[2])

    # context = sum_i alpha_i C_i
    dalpha_total = dalpha + np.einsum("bd,bkd->bk", dcontext, slices)
    dslices = alpha[:, :, None] * dcontext[:, None, :]
    dscores = softmax_backward(dalpha_total, alpha, axis=-1)
    dpre = dscores * (1.0 - scores * scores)          # through tanh
    dslice_w = np.einsum("bk,bkd->d", dpre, slices)
    dslices += dpre[:, :, None] * params.slice_w.data[None, None, :]
    dpre_sum = dpre.sum(axis=1)                       # [B]
    dhidden_w = dpre_sum @ h_prev
    dh_prev = dpre_sum[:, None] * params.hidden_w.data[None, :]
    if squeeze:
        return dslices[0], dh_prev[0], dhidden_w, dslice_w
    return dslices, dh_prev, dhidden_w, dslice_w


def alpha_to_saliency(alpha, frame_h, frame_w):
    """Expand a K^2 region-weight vector into a frame-sized saliency map.

    The weights are reshaped to K x K, bilinearly upsampled, and rescaled
    so the peak is 1 (a uniform map stays uniform at its own value).
    """
    if frame_h < 1 or frame_w < 1:
        raise ShapeError("frame dimensions must be positive")
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    k = int(round(np.sqrt(alpha.size)))
    if k * k != alpha.size:
        raise ShapeError(f"alpha length {alpha.size} is not a perfect square")
    grid = alpha.reshape(k, k)
    up = bilinear_resize(grid, frame_h, frame_w)
    up = np.maximum(up, 0.0)
    peak = up.max()
    if peak > 0:
        up = up / peak
    return up.astype(np.float32)
