"""Deterministic image resampling helpers shared across the package.

Everything here is plain NumPy with precomputed weight matrices, so results
are bit-reproducible for identical inputs.
"""

import functools

import numpy as np


@functools.lru_cache(maxsize=32)
def _area_weights(src: int, dst: int) -> np.ndarray:
    """Row matrix W [dst, src]: each output sample averages its exact
    source interval (box filter), handling non-integer scale factors."""
    w = np.zeros((dst, src), dtype=np.float64)
    scale = src / dst
    for i in range(dst):
        lo, hi = i * scale, (i + 1) * scale
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, src)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap
    w /= w.sum(axis=1, keepdims=True)
    return w


def area_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Box-filter (area) resize of a 2-D image; exact for any scale ratio."""
    wh = _area_weights(img.shape[0], out_h)
    ww = _area_weights(img.shape[1], out_w)
    out = wh @ img.astype(np.float64) @ ww.T
    return out.astype(img.dtype if img.dtype in (np.float32, np.float64) else np.float32)


@functools.lru_cache(maxsize=64)
def _linear_weights(src: int, dst: int) -> np.ndarray:
    """Bilinear row matrix [dst, src] mapping sample endpoints to endpoints
    (output corners coincide with input corners)."""
    w = np.zeros((dst, src), dtype=np.float64)
    if src == 1:
        w[:, 0] = 1.0
        return w
    if dst == 1:
        w[0, 0] = 1.0
        return w
    scale = (src - 1) / (dst - 1)
    for i in range(dst):
        pos = i * scale
        j = min(int(np.floor(pos)), src - 2)
        frac = pos - j
        w[i, j] = 1.0 - frac
        w[i, j + 1] = frac
    return w


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of a 2-D image, endpoint-aligned."""
    wh = _linear_weights(img.shape[0], out_h)
    ww = _linear_weights(img.shape[1], out_w)
    out = wh @ img.astype(np.float64) @ ww.T
    return out.astype(img.dtype if img.dtype in (np.float32, np.float64) else np.float32)


_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _blur5_axis(img: np.ndarray, axis: int) -> np.ndarray:
    """5-tap binomial blur along one axis with edge replication."""
    pad = [(0, 0), (0, 0)]
    pad[axis] = (2, 2)
    padded = np.pad(img, pad, mode="edge")
    out = np.zeros_like(img, dtype=np.float64)
    for t, coef in enumerate(_BINOMIAL5):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(t, t + img.shape[axis])
        out += coef * padded[tuple(sl)]
    return out


def gaussian_blur5(img: np.ndarray) -> np.ndarray:
    """Separable 5-tap binomial (approximate Gaussian) blur."""
    return _blur5_axis(_blur5_axis(np.asarray(img, dtype=np.float64), 0), 1)


def pyramid_down(img: np.ndarray) -> np.ndarray:
    """Blur then decimate by 2 (even indices)."""
    return gaussian_blur5(img)[::2, ::2]


def gaussian_pyramid(img: np.ndarray, levels: int) -> list:
    """Levels 0..levels, level 0 being the input itself."""
    pyr = [np.asarray(img, dtype=np.float64)]
    for _ in range(levels):
        pyr.append(pyramid_down(pyr[-1]))
    return pyr
